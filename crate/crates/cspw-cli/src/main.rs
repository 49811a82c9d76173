use clap::Parser;

mod report;
mod run;

fn main() {
    let cli = run::Cli::parse();
    std::process::exit(run::dispatch(cli));
}

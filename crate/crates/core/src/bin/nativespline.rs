use clap::Parser;

fn main() {
    let cli = nativespline::cli::Cli::parse();
    std::process::exit(nativespline::cli::run(cli));
}

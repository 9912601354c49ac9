use clap::Parser;

fn main() {
    let cli = splitpde::cli::Cli::parse();
    std::process::exit(splitpde::cli::main_with(&cli));
}

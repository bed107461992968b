use clap::Parser;

fn main() {
    let cli = glamech_cli::Cli::parse();
    std::process::exit(glamech_cli::run(cli));
}

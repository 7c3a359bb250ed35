use clap::Parser;

fn main() {
    let args = scatwave::cli::Args::parse();
    std::process::exit(scatwave::cli::run(&args));
}

use clap::Parser;

fn main() {
    let args = qdopfo_cli::Args::parse();
    std::process::exit(qdopfo_cli::main_with(&args));
}

use clap::Parser;

fn main() {
    let args = hdustat_cli::Args::parse();
    std::process::exit(hdustat_cli::main_with_args(&args));
}

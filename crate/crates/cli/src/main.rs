use clap::Parser;

fn main() {
    let cli = rsamp_cli::Cli::parse();
    match rsamp_cli::execute(cli) {
        Ok(msg) => println!("{msg}"),
        Err(e) => {
            eprintln!("rsamp: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

use clap::Parser;

fn main() {
    let cli = bimorph_cli::Cli::parse();
    match bimorph_cli::run(&cli) {
        Ok(dir) => println!("{}", dir.display()),
        Err(e) => {
            eprintln!("bimorph {}: {e}", cli.command.name());
            std::process::exit(e.exit_code());
        }
    }
}

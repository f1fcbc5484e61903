use clap::Parser;

use ssapx_cli::app::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let (out, err) = run(&cli);
    print!("{out}");
    if let Some(e) = err {
        eprintln!("ssapx: {e}");
        std::process::exit(e.code() as i32);
    }
}

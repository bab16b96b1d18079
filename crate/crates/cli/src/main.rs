use clap::Parser;
use sigkern_cli::{run, Args};

fn main() {
    let args = Args::parse();
    let result = match args.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| run(&args)),
            Err(e) => {
                eprintln!("error: cannot start {t} threads: {e}");
                std::process::exit(2);
            }
        },
        None => run(&args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

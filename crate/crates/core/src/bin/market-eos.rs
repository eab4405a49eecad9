use std::io;
use std::path::PathBuf;

fn main() {
    let out_dir = std::env::var_os(market_eos::cli::OUT_DIR_ENV).map(PathBuf::from);
    let code = market_eos::cli::run(
        std::env::args_os(),
        out_dir,
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    std::process::exit(code);
}

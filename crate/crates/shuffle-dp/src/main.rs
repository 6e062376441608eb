use std::process::exit;

fn main() {
    exit(shuffle_dp::cli::run(std::env::args_os()));
}

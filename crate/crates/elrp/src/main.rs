fn main() {
    std::process::exit(elrp::cli::dispatch(std::env::args_os()));
}

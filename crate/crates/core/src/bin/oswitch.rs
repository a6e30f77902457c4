fn main() {
    std::process::exit(oswitch::cli::dispatch(std::env::args_os()));
}

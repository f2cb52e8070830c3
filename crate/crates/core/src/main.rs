fn main() {
    std::process::exit(micromacro::cli::parse_and_dispatch(std::env::args_os()));
}

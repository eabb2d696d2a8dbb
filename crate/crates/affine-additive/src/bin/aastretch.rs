fn main() {
    std::process::exit(affine_additive::cli::run(std::env::args_os()));
}

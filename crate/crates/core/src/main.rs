fn main() {
    std::process::exit(mmp_ood::cli::main_with_args(std::env::args_os()));
}

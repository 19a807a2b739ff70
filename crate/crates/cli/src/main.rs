fn main() {
    std::process::exit(mzsim_cli::run(std::env::args_os()));
}

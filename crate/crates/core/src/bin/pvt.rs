fn main() {
    std::process::exit(pvt_energy::cli::run(std::env::args_os()));
}

fn main() {
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    std::process::exit(fftmatvec_cli::matvec::main_with(std::env::args(), &mut out, &mut err));
}

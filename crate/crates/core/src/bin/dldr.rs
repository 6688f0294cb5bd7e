fn main() {
    // failures are reported as JSON by the CLI itself
    std::panic::set_hook(Box::new(|_| {}));
    let code = dldr::cli::main_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}

//! `stub-teacher` binary: reference wire-protocol server for tests and local
//! experiments. Answers emits with the oracle token (or a fixed override),
//! acks feedback, and exits once a client sends shutdown.

use std::io::Write;
use std::net::TcpListener;
use std::process::exit;

use clap::Parser;
use mentor_core::remote::serve_stub;

#[derive(Parser, Debug)]
#[command(name = "stub-teacher", version, about = "Minimal remote-teacher server")]
struct Args {
    /// Listen address; port 0 picks a free port.
    #[arg(long, value_name = "ADDR", default_value = "127.0.0.1:0")]
    listen: String,
    /// Answer every emit with this token name instead of the oracle's pick.
    #[arg(long, value_name = "NAME")]
    token_name: Option<String>,
}

fn main() {
    let args = Args::parse();
    let listener = match TcpListener::bind(&args.listen) {
        Ok(listener) => listener,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", args.listen);
            exit(4);
        }
    };
    match listener.local_addr() {
        // The resolved address goes to stdout so callers can connect to an
        // ephemeral port; flush before blocking in accept.
        Ok(addr) => {
            println!("listening on {addr}");
            let _ = std::io::stdout().flush();
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit(4);
        }
    }
    if let Err(e) = serve_stub(listener, args.token_name.as_deref()) {
        eprintln!("error: {e}");
        exit(4);
    }
}

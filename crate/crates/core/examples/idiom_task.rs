//! Runs the idiom task and prints the three systems' scores.
//!
//! `cargo run --release --example idiom_task -- [epochs] [pairs] [idioms]`

use phramem::experiment::{run_idiom_task, IdiomTaskSettings};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut s = IdiomTaskSettings::default();
    let num = |i: usize| args.get(i).and_then(|a| a.parse::<usize>().ok());
    if let Some(e) = num(0) {
        s.epochs = e;
    }
    if let Some(p) = num(1) {
        s.pairs = p;
    }
    if let Some(k) = num(2) {
        s.idioms = k;
    }
    match run_idiom_task(&s) {
        Ok(r) => println!("{}", serde_json::to_string_pretty(&r).unwrap()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}

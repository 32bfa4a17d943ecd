use std::io::{self, BufRead, IsTerminal, Write};

use clap::error::ErrorKind;
use clap::Parser;

use ckn_core::compiler::FrozenKb;

use crate::args::{Cli, ReplLine};
use crate::commands::answer;
use crate::Failure;

const HELP: &str = "queries use the `ckn query` grammar, e.g.\n  \
    q1 --cat ako Teeth#Elephant Organ#Animal\n  \
    q2 --cat ako Elephant --descendants\n  \
    q3 Presence#Human Presence#Mouse\n  \
    q4 Presence#Human --sign - --affects\n\
    :quit exits";

/// Answers one query per line until end of input or `:quit`. Errors are
/// reported on stderr and the loop continues.
pub fn run(cli: &Cli, kb: &FrozenKb) -> Result<(), Failure> {
    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let mut stdout = io::stdout();
    let mut lines = stdin.lock().lines();
    loop {
        if interactive {
            print!("ckn> ");
            let _ = stdout.flush();
        }
        let Some(line) = lines.next() else {
            return Ok(());
        };
        let line = line.map_err(|e| Failure::usage(format!("cannot read input: {e}")))?;
        let line = line.trim();
        match line {
            "" => continue,
            ":quit" | ":q" => return Ok(()),
            ":help" => {
                println!("{HELP}");
                continue;
            }
            _ => {}
        }
        let Some(words) = shlex::split(line) else {
            eprintln!("error: unbalanced quotes");
            continue;
        };
        match ReplLine::try_parse_from(&words) {
            Ok(parsed) => match answer(cli, kb, &parsed.query) {
                Ok(text) => {
                    print!("{text}");
                    let _ = stdout.flush();
                }
                Err(failure) => eprintln!("error: {}", failure.message),
            },
            Err(err) if err.kind() == ErrorKind::DisplayHelp => {
                let _ = err.print();
            }
            Err(err) => eprintln!("{}", err.to_string().trim_end()),
        }
    }
}

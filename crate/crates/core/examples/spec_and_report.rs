//! Parsing a spec file, running commands and reading the cached report.

use densimodel::cli::{run, Command, Flags};
use densimodel::spec_file::parse_spec;

const SPEC: &str = r#"{
  "ring": {"p": 2, "f": 1, "e": 2, "eis": [-2, 0, 1]},
  "blocks": [
    {"scale": 0, "block": "A(pi^1, u1*pi^3)"},
    {"scale": 0, "block": "(1)"}
  ]
}"#;

fn main() -> densimodel::Result<()> {
    let spec = parse_spec(SPEC)?;
    println!("canonical spec: {}", spec.to_canonical());

    let dir = tempfile::tempdir()?;
    let flags = Flags {
        cache_dir: Some(dir.path().to_path_buf()),
        ..Flags::default()
    };
    let first = run(Command::Density, SPEC, &flags);
    print!("{}", first.stdout);
    let second = run(Command::Density, SPEC, &Flags { pretty: true, ..flags });
    println!("cache hit: {}", second.cache_hit);
    print!("{}", second.stdout);

    let bad = run(Command::Model, &SPEC.replace("pi^1", "pi^"), &Flags::default());
    print!("exit {}: {}", bad.exit_code, bad.stderr);
    Ok(())
}

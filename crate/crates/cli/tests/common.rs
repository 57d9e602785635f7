#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn npd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npd"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Small 2D configuration with the given experiment table appended.
pub fn config_text(
    output_dir: &Path,
    t_end: f64,
    body: bool,
    extra_stepper: &str,
    experiment: &str,
) -> String {
    let body = if body {
        "body = { kind = \"band_limited\", amplitude = 0.2, seed = 7 }"
    } else {
        ""
    };
    format!(
        r#"schema_version = 1
output_dir = "{}"

[scenario]
dim = 2
n = 16
diffusivity = 1.0
valences = [1.0, -1.0]
means = [1.0, 1.0]
epsilon = 0.3
seed = 2
{body}

[stepper]
dt = "auto"
t_end = {t_end}
output_every = 0.1
{extra_stepper}

[experiment]
{experiment}
"#,
        output_dir.display()
    )
}

pub fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

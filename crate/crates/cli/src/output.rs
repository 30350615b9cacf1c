//! Provenance, file/stdout emission and gnuplot scripts.

use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::Value;

use crate::CliError;

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write the secondary JSON here. Without it the JSON is appended to the
    /// CSV as `# json:` comment lines.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PlotArgs {
    /// Also write a gnuplot script that plots the CSV.
    #[arg(long, value_name = "PATH")]
    pub gnuplot: Option<PathBuf>,
}

/// `# levelflow <version>: <arguments>` with shell-style quoting where needed.
pub fn provenance(argv: &[String]) -> String {
    let args: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| {
            if a.is_empty() || a.chars().any(|c| c.is_whitespace() || c == '\'' || c == '"') {
                format!("'{}'", a.replace('\'', "'\\''"))
            } else {
                a.clone()
            }
        })
        .collect();
    format!("# levelflow {}: levelflow {}\n", env!("CARGO_PKG_VERSION"), args.join(" "))
}

pub enum Secondary {
    Document(Value),
    Lines(Vec<Value>),
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| {
        CliError::Lib(levelflow::LevelflowError::Io { path: path.display().to_string(), source })
    })
}

/// Emits provenance + CSV and the secondary JSON according to `out`.
pub fn emit(argv: &[String], csv: &str, secondary: Secondary, out: &OutputArgs) -> Result<(), CliError> {
    let mut primary = provenance(argv);
    primary.push_str(csv);
    let lines: Vec<String> = match &secondary {
        Secondary::Document(v) => vec![v.to_string()],
        Secondary::Lines(vs) => vs.iter().map(Value::to_string).collect(),
    };
    match &out.json {
        Some(path) => write_file(path, &(lines.join("\n") + "\n"))?,
        None => {
            for l in lines {
                primary.push_str("# json: ");
                primary.push_str(&l);
                primary.push('\n');
            }
        }
    }
    match &out.out {
        Some(path) => write_file(path, &primary),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(primary.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Lib(levelflow::LevelflowError::Io { path: "<stdout>".into(), source }))
        }
    }
}

pub enum PlotKind {
    /// First column against every other column.
    Lines { columns: usize, xlabel: &'static str, ylabel: &'static str },
    /// Real and imaginary parts against the first column, starting at column 3.
    ComplexLines { values: usize, xlabel: &'static str },
    /// Real parts over an (x, y) grid.
    Surface { values: usize },
}

pub fn write_gnuplot(plot: &PlotArgs, out: &OutputArgs, kind: PlotKind) -> Result<(), CliError> {
    let Some(path) = &plot.gnuplot else {
        return Ok(());
    };
    let data = match &out.out {
        Some(p) => p.display().to_string().replace('\'', "''"),
        None => "levelflow.csv".to_string(),
    };
    let mut s = String::from("# gnuplot script written by levelflow\n");
    if out.out.is_none() {
        s.push_str("# the CSV went to stdout; save it as levelflow.csv next to this script\n");
    }
    s.push_str("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n");
    s.push_str(&format!("data = '{data}'\n"));
    match kind {
        PlotKind::Lines { columns, xlabel, ylabel } => {
            s.push_str(&format!("set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"));
            s.push_str(&format!("plot for [i=2:{columns}] data using 1:i with lines\n"));
        }
        PlotKind::ComplexLines { values, xlabel } => {
            let last = 2 + 2 * values;
            s.push_str("set multiplot layout 2,1\n");
            s.push_str(&format!("set xlabel '{xlabel}'\nset ylabel 'Re E'\n"));
            s.push_str(&format!("plot for [i=3:{last}:2] data using 1:i with lines\n"));
            s.push_str("set ylabel 'Im E'\n");
            s.push_str(&format!("plot for [i=4:{last}:2] data using 1:i with lines\n"));
            s.push_str("unset multiplot\n");
        }
        PlotKind::Surface { values } => {
            let last = 2 + 2 * values;
            s.push_str("set xlabel 'Re z'\nset ylabel 'Im z'\nset zlabel 'Re E'\n");
            s.push_str(&format!("splot for [i=3:{last}:2] data using 1:2:i with points pointtype 7 pointsize 0.3\n"));
        }
    }
    s.push_str("pause mouse close\n");
    write_file(path, &s)
}

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;

/// Where command output goes: named files in a directory, or stdout.
pub struct Sink {
    dir: Option<PathBuf>,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> anyhow::Result<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Sink { dir, written: Vec::new() })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Writes `name` into the output directory, or prints it under a
    /// `# name` header when there is none.
    pub fn emit(&mut self, name: &str, body: &str) -> anyhow::Result<()> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
                self.written.push(path);
            }
            None => {
                let mut out = std::io::stdout().lock();
                writeln!(out, "# {name}")?;
                out.write_all(body.as_bytes())?;
                out.flush()?;
            }
        }
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Minimal CSV builder. Fields never contain commas or quotes here, so no
/// quoting is done.
pub struct Table {
    buf: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Table { buf, width: header.len() }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let fields: Vec<String> = fields.into_iter().map(|f| f.as_ref().to_owned()).collect();
        debug_assert_eq!(fields.len(), self.width);
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Two whitespace-separated columns, one point per line.
pub fn plot_data(points: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (x, y) in points {
        writeln!(s, "{} {}", num(*x), num(*y)).expect("string write");
    }
    s
}

/// Fixed float format shared by every table so reruns are byte-identical.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else {
        x.to_string()
    }
}

pub fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

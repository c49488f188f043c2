//! Run manifests and `key=value` output documents.
//!
//! Every output starts with `# key=value` comment lines describing the run
//! and ends with the wall-clock duration. The body holds the numeric
//! results, so two runs with the same manifest have identical bodies.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Command name, parameters, version and paths of one invocation.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub params: Vec<(String, String)>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    started: Instant,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            params: Vec::new(),
            input: None,
            output: None,
            started: Instant::now(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.into(), value.to_string()));
        self
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.input = Some(path.to_path_buf());
        self
    }

    pub fn output(mut self, path: Option<&Path>) -> Self {
        self.output = path.map(Path::to_path_buf);
        self
    }

    /// Header lines without the leading `# `.
    pub fn header(&self) -> Vec<String> {
        let mut lines = vec![
            format!("command={}", self.command),
            format!("version={}", env!("CARGO_PKG_VERSION")),
        ];
        lines.extend(self.params.iter().map(|(k, v)| format!("param.{k}={v}")));
        if let Some(p) = &self.input {
            lines.push(format!("input={}", p.display()));
        }
        if let Some(p) = &self.output {
            lines.push(format!("output={}", p.display()));
        }
        lines
    }

    /// Closing line without the leading `# `.
    pub fn footer(&self) -> String {
        format!("duration_seconds={:.3}", self.started.elapsed().as_secs_f64())
    }
}

/// Writes a document to stdout and, when a path is given, to that file.
/// Lines are flushed as they are written.
pub struct Sink {
    file: Option<File>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> io::Result<Self> {
        Ok(Self {
            file: path.map(File::create).transpose()?,
        })
    }

    pub fn line(&mut self, text: &str) -> io::Result<()> {
        let mut stdout = io::stdout().lock();
        writeln!(stdout, "{text}")?;
        stdout.flush()?;
        if let Some(f) = &mut self.file {
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        Ok(())
    }

    pub fn comment(&mut self, text: &str) -> io::Result<()> {
        self.line(&format!("# {text}"))
    }

    pub fn pair(&mut self, key: &str, value: &str) -> io::Result<()> {
        self.line(&format!("{key}={value}"))
    }

    pub fn header(&mut self, manifest: &RunManifest) -> io::Result<()> {
        manifest.header().iter().try_for_each(|l| self.comment(l))
    }

    pub fn footer(&mut self, manifest: &RunManifest) -> io::Result<()> {
        self.comment(&manifest.footer())
    }
}

/// Writes a complete `key=value` document.
pub fn write_document(manifest: &RunManifest, body: &[(String, String)]) -> io::Result<()> {
    let mut sink = Sink::open(manifest.output.as_deref())?;
    sink.header(manifest)?;
    for (k, v) in body {
        sink.pair(k, v)?;
    }
    sink.footer(manifest)
}

/// The body lines of a document: everything that is not a comment.
pub fn body_lines(text: &str) -> Vec<&str> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .collect()
}

/// Parses the body of a document into ordered pairs.
pub fn parse_pairs(text: &str) -> Vec<(String, String)> {
    body_lines(text)
        .into_iter()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_lists_parameters_in_order() {
        let m = RunManifest::new("generate")
            .param("n", 3)
            .param("f", 0.3)
            .output(Some(Path::new("p.txt")));
        let h = m.header();
        assert_eq!(h[0], "command=generate");
        assert_eq!(h[2], "param.n=3");
        assert_eq!(h[3], "param.f=0.3");
        assert_eq!(h[4], "output=p.txt");
        assert!(m.footer().starts_with("duration_seconds="));
    }

    #[test]
    fn pairs_skip_comments() {
        let text = "# command=x\na=1\n\nb=2.5e0\n# duration_seconds=0.1\n";
        assert_eq!(
            parse_pairs(text),
            vec![("a".into(), "1".into()), ("b".into(), "2.5e0".into())]
        );
    }
}

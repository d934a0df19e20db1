use std::fmt;

use serde::{Deserialize, Serialize};

/// An ordered list of shell command lines, optionally tagged with the
/// startup phase it belongs to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandScript {
    lines: Vec<String>,
    phase: Option<String>,
}

impl CommandScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_phase(phase: impl Into<String>) -> Self {
        CommandScript {
            lines: Vec::new(),
            phase: Some(phase.into()),
        }
    }

    /// Appends one command. Trailing whitespace is stripped.
    pub fn push(&mut self, line: impl Into<String>) {
        let mut line = line.into();
        debug_assert!(!line.contains('\n'), "multi-line command: {line:?}");
        let trimmed = line.trim_end().len();
        line.truncate(trimmed);
        self.lines.push(line);
    }

    pub fn extend<I, S>(&mut self, lines: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for l in lines {
            self.push(l);
        }
    }

    pub fn append(&mut self, other: CommandScript) {
        self.lines.extend(other.lines);
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn lines_mut(&mut self) -> &mut Vec<String> {
        &mut self.lines
    }

    pub fn phase(&self) -> Option<&str> {
        self.phase.as_deref()
    }

    pub fn set_phase(&mut self, phase: impl Into<String>) {
        self.phase = Some(phase.into());
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Newline-terminated text, one command per line.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.lines.iter().map(|l| l.len() + 1).sum());
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    /// Parses rendered text back; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let mut s = CommandScript::new();
        for l in text.lines() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            s.push(t);
        }
        s
    }
}

impl fmt::Display for CommandScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl<'a> IntoIterator for &'a CommandScript {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.lines.iter()
    }
}

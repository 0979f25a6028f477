//! Plain-text prompt templates with `{{name}}` placeholders.

use std::fs;
use std::io;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub answer: String,
    pub classify: String,
    pub extract: String,
    pub propose: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            answer: include_str!("prompts/answer.txt").to_string(),
            classify: include_str!("prompts/classify.txt").to_string(),
            extract: include_str!("prompts/extract.txt").to_string(),
            propose: include_str!("prompts/propose.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Reads `<name>.txt` for each template present in `dir`.
    pub fn load_dir(dir: &Path) -> io::Result<Self> {
        let mut templates = Self::default();
        for (name, slot) in [
            ("answer", &mut templates.answer),
            ("classify", &mut templates.classify),
            ("extract", &mut templates.extract),
            ("propose", &mut templates.propose),
        ] {
            match fs::read_to_string(dir.join(format!("{name}.txt"))) {
                Ok(text) => *slot = text,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(e),
            }
        }
        Ok(templates)
    }

    /// Writes the built-in templates into `dir`.
    pub fn write_defaults(dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let d = Self::default();
        for (name, text) in [
            ("answer", &d.answer),
            ("classify", &d.classify),
            ("extract", &d.extract),
            ("propose", &d.propose),
        ] {
            fs::write(dir.join(format!("{name}.txt")), text)?;
        }
        Ok(())
    }
}

/// Substitutes every `{{key}}` in one pass; unknown placeholders are kept.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let key = after[..close].trim();
                match values.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => out.push_str(&rest[open..open + 4 + close]),
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

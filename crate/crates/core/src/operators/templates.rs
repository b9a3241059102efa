use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Bumped whenever the wording of a built-in template changes.
pub const TEMPLATE_VERSION: &str = "1";

const BUILTIN: &[(&str, &str)] = &[
    ("system", include_str!("../../templates/system.txt")),
    ("program_init", include_str!("../../templates/program_init.txt")),
    ("program_crossover", include_str!("../../templates/program_crossover.txt")),
    ("program_mutation", include_str!("../../templates/program_mutation.txt")),
    ("test_init", include_str!("../../templates/test_init.txt")),
    ("test_augment", include_str!("../../templates/test_augment.txt")),
    ("augment_uncovered", include_str!("../../templates/augment_uncovered.txt")),
    ("augment_boundary", include_str!("../../templates/augment_boundary.txt")),
];

/// Prompt wording, keyed by template name. Placeholders look like
/// `{{name}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    texts: BTreeMap<String, String>,
}

impl Default for Templates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Templates {
    pub fn builtin() -> Self {
        Self {
            texts: BUILTIN
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Built-ins overridden by any `<name>.txt` present in `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::Config(format!(
                "template directory {} does not exist",
                dir.display()
            )));
        }
        let mut t = Self::builtin();
        for (name, _) in BUILTIN {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                t.texts.insert(name.to_string(), text);
            }
        }
        Ok(t)
    }

    pub fn get(&self, name: &str) -> &str {
        self.texts.get(name).map(String::as_str).unwrap_or("")
    }

    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> String {
        render(self.get(name), vars)
    }
}

/// Single-pass substitution: text inserted for one placeholder is never
/// scanned for further placeholders. Unknown placeholders are left as is.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let key = after[..close].trim();
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => out.push_str(&rest[open..open + 2 + close + 2]),
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

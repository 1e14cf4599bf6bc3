use thiserror::Error;

/// Instruction used when the configuration does not supply one.
pub const DEFAULT_INSTRUCTION: &str = "Translate the phrase '{label}' from {src_lang} to {tgt_lang} such that your translation is an exact substring of the following {tgt_lang} sentence. Sentence: {context}. Answer with the translated phrase only.";

const PLACEHOLDERS: [&str; 4] = ["src_lang", "tgt_lang", "context", "label"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("unresolved placeholder {{{0}}} in instruction template")]
    Unresolved(String),
    #[error("instruction template must contain {{{name}}} {expected}, found {found}")]
    PlaceholderCount {
        name: &'static str,
        expected: &'static str,
        found: usize,
    },
    #[error("in-context example {index}: projected label {label:?} does not occur in its context")]
    ExampleNotInContext { index: usize, label: String },
}

/// A demonstration shown to the contextual translator before the query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptExample {
    pub context: String,
    pub source_label: String,
    pub projected_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub instruction: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub examples: Vec<PromptExample>,
    pub query_label: String,
    pub context: String,
}

/// English name for common language tags; other tags render verbatim.
pub fn language_name(tag: &str) -> &str {
    let primary = tag.split(['-', '_']).next().unwrap_or(tag);
    match primary {
        "ar" => "Arabic",
        "de" => "German",
        "en" => "English",
        "es" => "Spanish",
        "fr" => "French",
        "hi" => "Hindi",
        "it" => "Italian",
        "ja" => "Japanese",
        "ko" => "Korean",
        "pt" => "Portuguese",
        "ru" => "Russian",
        "zh" => "Chinese",
        _ => tag,
    }
}

/// Positions of `{name}` placeholders: (byte start, byte end, name).
fn placeholders(template: &str) -> Vec<(usize, usize, &str)> {
    let mut found = Vec::new();
    let mut rest = 0;
    while let Some(open) = template[rest..].find('{').map(|i| rest + i) {
        let Some(close) = template[open + 1..].find('}').map(|i| open + 1 + i) else {
            break;
        };
        let name = &template[open + 1..close];
        let is_ident = !name.is_empty()
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && !name.starts_with(|c: char| c.is_ascii_digit());
        if is_ident {
            found.push((open, close + 1, name));
            rest = close + 1;
        } else {
            rest = open + 1;
        }
    }
    found
}

fn check_template(template: &str) -> Result<(), PromptError> {
    let found = placeholders(template);
    if let Some((_, _, name)) = found.iter().find(|(_, _, n)| !PLACEHOLDERS.contains(n)) {
        return Err(PromptError::Unresolved(name.to_string()));
    }
    let count = |name| found.iter().filter(|(_, _, n)| *n == name).count();
    let labels = count("label");
    if labels == 0 {
        return Err(PromptError::PlaceholderCount {
            name: "label",
            expected: "at least once",
            found: labels,
        });
    }
    let contexts = count("context");
    if contexts != 1 {
        return Err(PromptError::PlaceholderCount {
            name: "context",
            expected: "exactly once",
            found: contexts,
        });
    }
    Ok(())
}

fn render(template: &str, src: &str, tgt: &str, label: &str, context: &str) -> String {
    let mut out = String::with_capacity(template.len() + label.len() + context.len());
    let mut last = 0;
    for (start, end, name) in placeholders(template) {
        out.push_str(&template[last..start]);
        out.push_str(match name {
            "src_lang" => src,
            "tgt_lang" => tgt,
            "label" => label,
            _ => context,
        });
        last = end;
    }
    out.push_str(&template[last..]);
    out
}

/// Renders the full prompt: each example as the filled instruction followed
/// by its answer line and a blank line, then the filled query.
pub fn build_prompt(spec: &PromptSpec) -> Result<String, PromptError> {
    check_template(&spec.instruction)?;
    let src = language_name(&spec.src_lang);
    let tgt = language_name(&spec.tgt_lang);
    let mut prompt = String::new();
    for (index, example) in spec.examples.iter().enumerate() {
        if !example.context.contains(&example.projected_label) || example.projected_label.is_empty() {
            return Err(PromptError::ExampleNotInContext {
                index,
                label: example.projected_label.clone(),
            });
        }
        prompt.push_str(&render(
            &spec.instruction,
            src,
            tgt,
            &example.source_label,
            &example.context,
        ));
        prompt.push('\n');
        prompt.push_str(&example.projected_label);
        prompt.push_str("\n\n");
    }
    prompt.push_str(&render(&spec.instruction, src, tgt, &spec.query_label, &spec.context));
    Ok(prompt)
}

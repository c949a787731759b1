//! Display-equation extraction and masked-equation items.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::items::{MaskedEquationItem, MASK};

const ENVIRONMENTS: [&str; 3] = ["equation", "align", "eqnarray"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayEquation {
    /// Whole block including delimiters.
    pub span: Range<usize>,
    /// Trimmed body; `source[body]` is the equation source.
    pub body: Range<usize>,
    pub environment: String,
}

impl DisplayEquation {
    pub fn prefix_span(&self) -> Range<usize> {
        0..self.span.start
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub equations: Vec<DisplayEquation>,
    pub warnings: Vec<String>,
}

static OPENER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\\begin\{(equation|align|eqnarray)(\*?)\}|\\\[|%").expect("opener regex"));

/// True when the backslash at `pos` is itself escaped (`\\[` is a line break).
fn escaped(src: &str, pos: usize) -> bool {
    src[..pos].bytes().rev().take_while(|&b| b == b'\\').count() % 2 == 1
}

fn trimmed(src: &str, r: Range<usize>) -> Range<usize> {
    let s = &src[r.clone()];
    let lead = s.len() - s.trim_start().len();
    let trail = s.len() - s.trim_end().len();
    r.start + lead..r.end - trail
}

/// Display-math blocks (`equation`/`align`/`eqnarray`, starred or not, and
/// `\[ … \]`) in source order. Inline math and commented-out text are
/// ignored; unbalanced or nested blocks are skipped with a warning.
pub fn extract_display_equations(src: &str) -> Extraction {
    let mut out = Extraction::default();
    let mut pos = 0;
    while let Some(m) = OPENER.find_at(src, pos) {
        let tok = m.as_str();
        if tok == "%" {
            if escaped(src, m.start()) {
                pos = m.end();
            } else {
                pos = src[m.end()..].find('\n').map_or(src.len(), |i| m.end() + i);
            }
            continue;
        }
        if escaped(src, m.start()) {
            pos = m.end();
            continue;
        }
        let (env, closer) = if tok == r"\[" {
            ("bracket".to_string(), r"\]".to_string())
        } else {
            let name = tok.trim_start_matches(r"\begin{").trim_end_matches('}').to_string();
            let closer = format!(r"\end{{{name}}}");
            (name, closer)
        };
        let body_start = m.end();
        let Some(rel) = src[body_start..].find(&closer) else {
            out.warnings
                .push(format!("unterminated {env} block at byte {}", m.start()));
            pos = m.end();
            continue;
        };
        let body_end = body_start + rel;
        // another display opener inside the body means the block is malformed
        let inner = &src[body_start..body_end];
        let nested = OPENER
            .find_iter(inner)
            .any(|n| n.as_str() != "%" && !escaped(src, body_start + n.start()));
        if nested {
            out.warnings
                .push(format!("nested display math in {env} block at byte {}", m.start()));
            pos = m.end();
            continue;
        }
        let body = trimmed(src, body_start..body_end);
        if body.is_empty() {
            out.warnings.push(format!("empty {env} block at byte {}", m.start()));
        } else {
            out.equations.push(DisplayEquation {
                span: m.start()..body_end + closer.len(),
                body,
                environment: env,
            });
        }
        pos = body_end + closer.len();
    }
    debug_assert!(ENVIRONMENTS.iter().all(|e| OPENER.as_str().contains(e)));
    out
}

static LATEX_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\\[A-Za-z]+|[0-9]+(?:\.[0-9]+)?|[^\s{}\\]").expect("token regex"));

static SINGLE_SYMBOL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:\\[A-Za-z]+|[A-Za-z])(?:\s*[_^]\s*(?:\{[^{}]*\}|\\[A-Za-z]+|[A-Za-z0-9]))*'*$")
        .expect("symbol regex")
});

/// Definition-like equations are not masked: a single (possibly sub- or
/// superscripted) symbol on the left of the first `=` and at most three
/// tokens on the right, e.g. `\gamma = S/N`.
pub fn is_definition(equation: &str) -> bool {
    let body = equation.trim().trim_end_matches(['.', ',', ';']);
    let Some(eq) = body.find('=') else {
        return false;
    };
    let lhs = body[..eq].trim().trim_end_matches(':').trim();
    let lhs = lhs.trim_start_matches('&').trim();
    let rhs = body[eq + 1..].trim_start_matches('&');
    if rhs.contains('=') {
        return false;
    }
    SINGLE_SYMBOL.is_match(lhs) && LATEX_TOKEN.find_iter(rhs).count() <= 3
}

/// One item per non-definition display equation, up to `max_items`. The
/// context runs from the document start to the end of the paragraph that
/// holds the target, with earlier equations in ground-truth form.
pub fn make_masked_equation_items(doc_id: &str, src: &str, max_items: usize) -> (Vec<MaskedEquationItem>, Vec<String>) {
    if src.contains(MASK) {
        return (Vec::new(), vec![format!("{doc_id}: source already contains {MASK}")]);
    }
    let Extraction {
        equations,
        mut warnings,
    } = extract_display_equations(src);
    let mut items = Vec::new();
    for (ordinal, eq) in equations.iter().enumerate() {
        if items.len() >= max_items {
            break;
        }
        let truth = &src[eq.body.clone()];
        if is_definition(truth) {
            continue;
        }
        let para_end = src[eq.span.end..].find("\n\n").map_or(src.len(), |i| eq.span.end + i);
        let mut context = String::with_capacity(para_end + MASK.len());
        context.push_str(&src[..eq.body.start]);
        context.push_str(MASK);
        context.push_str(&src[eq.body.end..para_end]);
        items.push(MaskedEquationItem {
            doc_id: doc_id.to_string(),
            context,
            ground_truth_equation: truth.to_string(),
            equation_ordinal: ordinal,
        });
    }
    warnings.iter_mut().for_each(|w| *w = format!("{doc_id}: {w}"));
    (items, warnings)
}

//! Parser for the discrete subset of the Bayesian-network interchange text
//! format: `variable` blocks with discrete state lists and `probability`
//! blocks with `table` rows or per-parent-combination tuple rows. Continuous
//! variables and non-table distributions are rejected. CPT rows must sum to
//! one within 1e-6 and are renormalized exactly after the check.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::graph::Dag;
use crate::synth::{BayesNet, Cpt};

#[derive(Debug, Error)]
pub enum BifError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unsupported feature at line {line}: {message}")]
    Unsupported { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
struct Token {
    text: String,
    line: usize,
    col: usize,
}

const PUNCTUATION: &[char] = &['{', '}', '(', ')', '[', ']', '|', ',', ';', '='];

/// Words are runs of non-delimiter characters, so state names like `<5` or
/// `0-3_days` stay intact; quoted strings keep everything between quotes.
fn tokenize(text: &str) -> Result<Vec<Token>, BifError> {
    let mut tokens = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no_comment = match line.find("//") {
            Some(at) => &line[..at],
            None => line,
        };
        let mut chars = line_no_comment.char_indices().peekable();
        while let Some(&(at, c)) = chars.peek() {
            if c.is_whitespace() {
                chars.next();
            } else if PUNCTUATION.contains(&c) {
                chars.next();
                tokens.push(Token {
                    text: c.to_string(),
                    line: lineno + 1,
                    col: at + 1,
                });
            } else if c == '"' {
                chars.next();
                let mut word = String::new();
                let mut closed = false;
                for (_, ch) in chars.by_ref() {
                    if ch == '"' {
                        closed = true;
                        break;
                    }
                    word.push(ch);
                }
                if !closed {
                    return Err(BifError::Parse {
                        line: lineno + 1,
                        col: at + 1,
                        message: "unterminated string".into(),
                    });
                }
                tokens.push(Token {
                    text: word,
                    line: lineno + 1,
                    col: at + 1,
                });
            } else {
                let mut word = String::new();
                while let Some(&(_, ch)) = chars.peek() {
                    if ch.is_whitespace() || PUNCTUATION.contains(&ch) || ch == '"' {
                        break;
                    }
                    word.push(ch);
                    chars.next();
                }
                tokens.push(Token {
                    text: word,
                    line: lineno + 1,
                    col: at + 1,
                });
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at)
    }

    fn error_here(&self, message: impl Into<String>) -> BifError {
        let (line, col) = self
            .tokens
            .get(self.at.min(self.tokens.len().saturating_sub(1)))
            .map(|t| (t.line, t.col))
            .unwrap_or((0, 0));
        BifError::Parse {
            line,
            col,
            message: message.into(),
        }
    }

    fn next(&mut self, context: &str) -> Result<Token, BifError> {
        let token = self.tokens.get(self.at).cloned().ok_or_else(|| {
            self.error_here(format!("unexpected end of file, expected {context}"))
        })?;
        self.at += 1;
        Ok(token)
    }

    fn expect(&mut self, literal: &str) -> Result<Token, BifError> {
        let token = self.next(&format!("`{literal}`"))?;
        if token.text != literal {
            return Err(BifError::Parse {
                line: token.line,
                col: token.col,
                message: format!("expected `{literal}`, found `{}`", token.text),
            });
        }
        Ok(token)
    }

    fn eat(&mut self, literal: &str) -> bool {
        if self.peek().map(|t| t.text == literal).unwrap_or(false) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    /// Skips a balanced `{ ... }` block (network headers, properties).
    fn skip_block(&mut self) -> Result<(), BifError> {
        self.expect("{")?;
        let mut depth = 1;
        while depth > 0 {
            let token = self.next("`}`")?;
            match token.text.as_str() {
                "{" => depth += 1,
                "}" => depth -= 1,
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
struct Variable {
    name: String,
    states: Vec<String>,
}

#[derive(Debug)]
struct ProbabilityBlock {
    child: String,
    parents: Vec<String>,
    /// `table` row (marginal), or per-parent-state rows.
    table: Option<Vec<f64>>,
    rows: Vec<(Vec<String>, Vec<f64>)>,
    line: usize,
}

fn parse_number(token: &Token) -> Result<f64, BifError> {
    token.text.parse::<f64>().map_err(|_| BifError::Parse {
        line: token.line,
        col: token.col,
        message: format!("expected a number, found `{}`", token.text),
    })
}

fn parse_variable(parser: &mut Parser) -> Result<Variable, BifError> {
    let name = parser.next("variable name")?;
    parser.expect("{")?;
    let mut states = None;
    loop {
        let token = parser.next("`type` or `}`")?;
        match token.text.as_str() {
            "}" => break,
            "type" => {
                let kind = parser.next("variable type")?;
                if kind.text != "discrete" {
                    return Err(BifError::Unsupported {
                        line: kind.line,
                        message: format!(
                            "variable type `{}` (only discrete is supported)",
                            kind.text
                        ),
                    });
                }
                parser.expect("[")?;
                let count_tok = parser.next("state count")?;
                let count = count_tok
                    .text
                    .parse::<usize>()
                    .map_err(|_| BifError::Parse {
                        line: count_tok.line,
                        col: count_tok.col,
                        message: "state count must be an integer".into(),
                    })?;
                parser.expect("]")?;
                parser.expect("{")?;
                let mut list = Vec::new();
                loop {
                    let state = parser.next("state name")?;
                    match state.text.as_str() {
                        "}" => break,
                        "," => continue,
                        _ => list.push(state.text),
                    }
                }
                parser.eat(";");
                if list.len() != count {
                    return Err(BifError::Parse {
                        line: count_tok.line,
                        col: count_tok.col,
                        message: format!("declared {count} states, found {}", list.len()),
                    });
                }
                states = Some(list);
            }
            "property" => {
                // properties run to the end of the statement
                while !parser.eat(";") {
                    parser.next("`;`")?;
                }
            }
            other => {
                return Err(BifError::Parse {
                    line: token.line,
                    col: token.col,
                    message: format!("unexpected `{other}` in variable block"),
                })
            }
        }
    }
    let states =
        states.ok_or_else(|| parser.error_here(format!("variable {} has no type", name.text)))?;
    if states.len() < 2 {
        return Err(BifError::Parse {
            line: name.line,
            col: name.col,
            message: format!("variable {} needs at least two states", name.text),
        });
    }
    Ok(Variable {
        name: name.text,
        states,
    })
}

fn parse_probability(parser: &mut Parser) -> Result<ProbabilityBlock, BifError> {
    let open = parser.expect("(")?;
    let child = parser.next("variable name")?.text;
    let mut parents = Vec::new();
    if parser.eat("|") {
        loop {
            let token = parser.next("parent name or `)`")?;
            match token.text.as_str() {
                ")" => break,
                "," => continue,
                _ => parents.push(token.text),
            }
        }
    } else {
        parser.expect(")")?;
    }
    parser.expect("{")?;
    let mut table = None;
    let mut rows = Vec::new();
    loop {
        let token = parser.next("`table`, `(` or `}`")?;
        match token.text.as_str() {
            "}" => break,
            "table" => {
                let mut values = Vec::new();
                loop {
                    let tok = parser.next("number or `;`")?;
                    match tok.text.as_str() {
                        ";" => break,
                        "," => continue,
                        _ => values.push(parse_number(&tok)?),
                    }
                }
                table = Some(values);
            }
            "(" => {
                let mut states = Vec::new();
                loop {
                    let tok = parser.next("state name or `)`")?;
                    match tok.text.as_str() {
                        ")" => break,
                        "," => continue,
                        _ => states.push(tok.text),
                    }
                }
                let mut values = Vec::new();
                loop {
                    let tok = parser.next("number or `;`")?;
                    match tok.text.as_str() {
                        ";" => break,
                        "," => continue,
                        _ => values.push(parse_number(&tok)?),
                    }
                }
                rows.push((states, values));
            }
            "default" => {
                return Err(BifError::Unsupported {
                    line: token.line,
                    message: "`default` probability rows".into(),
                })
            }
            other => {
                return Err(BifError::Parse {
                    line: token.line,
                    col: token.col,
                    message: format!("unexpected `{other}` in probability block"),
                })
            }
        }
    }
    Ok(ProbabilityBlock {
        child,
        parents,
        table,
        rows,
        line: open.line,
    })
}

fn normalize_row(values: &[f64], line: usize, what: &str) -> Result<Vec<f64>, BifError> {
    let sum: f64 = values.iter().sum();
    if values.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-6 {
        return Err(BifError::Parse {
            line,
            col: 0,
            message: format!("{what}: probabilities sum to {sum}, expected 1 within 1e-6"),
        });
    }
    Ok(values.iter().map(|v| v / sum).collect())
}

/// Parses the discrete BIF subset into a Bayesian network.
pub fn parse_bif_str(text: &str) -> Result<BayesNet, BifError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, at: 0 };
    let mut variables: Vec<Variable> = Vec::new();
    let mut blocks: Vec<ProbabilityBlock> = Vec::new();
    while let Some(token) = parser.peek().cloned() {
        match token.text.as_str() {
            "network" => {
                parser.next("network")?;
                parser.next("network name")?;
                parser.skip_block()?;
            }
            "variable" => {
                parser.next("variable")?;
                variables.push(parse_variable(&mut parser)?);
            }
            "probability" => {
                parser.next("probability")?;
                blocks.push(parse_probability(&mut parser)?);
            }
            other => {
                return Err(BifError::Parse {
                    line: token.line,
                    col: token.col,
                    message: format!("unexpected top-level token `{other}`"),
                })
            }
        }
    }

    let index: HashMap<&str, usize> = variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    if index.len() != variables.len() {
        return Err(BifError::Parse {
            line: 0,
            col: 0,
            message: "duplicate variable name".into(),
        });
    }
    let lookup = |name: &str, line: usize| -> Result<usize, BifError> {
        index.get(name).copied().ok_or_else(|| BifError::Parse {
            line,
            col: 0,
            message: format!("unknown variable `{name}`"),
        })
    };

    let mut edges = Vec::new();
    let mut cpts: Vec<Option<Cpt>> = (0..variables.len()).map(|_| None).collect();
    for block in &blocks {
        let child = lookup(&block.child, block.line)?;
        let parent_ids: Vec<usize> = block
            .parents
            .iter()
            .map(|p| lookup(p, block.line))
            .collect::<Result<_, _>>()?;
        for &p in &parent_ids {
            edges.push((p, child));
        }
        let card = variables[child].states.len() as u32;
        // reorder declared parents into sorted-id order, the layout Cpt uses
        let mut order: Vec<usize> = (0..parent_ids.len()).collect();
        order.sort_by_key(|&i| parent_ids[i]);
        let sorted_parents: Vec<usize> = order.iter().map(|&i| parent_ids[i]).collect();
        let parent_cards: Vec<u32> = sorted_parents
            .iter()
            .map(|&p| variables[p].states.len() as u32)
            .collect();
        let row_count: usize = parent_cards.iter().map(|&c| c as usize).product();
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; row_count];

        if parent_ids.is_empty() {
            let table = block.table.as_ref().ok_or_else(|| BifError::Parse {
                line: block.line,
                col: 0,
                message: format!("marginal block for {} needs a table row", block.child),
            })?;
            if table.len() != card as usize {
                return Err(BifError::Parse {
                    line: block.line,
                    col: 0,
                    message: format!(
                        "{}: table has {} entries, cardinality is {card}",
                        block.child,
                        table.len()
                    ),
                });
            }
            rows[0] = Some(normalize_row(table, block.line, &block.child)?);
        } else {
            if block.table.is_some() {
                return Err(BifError::Unsupported {
                    line: block.line,
                    message: format!(
                        "conditional block for {} uses a flat table row",
                        block.child
                    ),
                });
            }
            for (states, values) in &block.rows {
                if states.len() != parent_ids.len() {
                    return Err(BifError::Parse {
                        line: block.line,
                        col: 0,
                        message: format!(
                            "{}: condition names {} parents, block declares {}",
                            block.child,
                            states.len(),
                            parent_ids.len()
                        ),
                    });
                }
                if values.len() != card as usize {
                    return Err(BifError::Parse {
                        line: block.line,
                        col: 0,
                        message: format!(
                            "{}: row has {} entries, cardinality is {card}",
                            block.child,
                            values.len()
                        ),
                    });
                }
                let mut idx = 0usize;
                for (slot, &orig) in order.iter().enumerate() {
                    let parent = sorted_parents[slot];
                    let state = &states[orig];
                    let value = variables[parent]
                        .states
                        .iter()
                        .position(|s| s == state)
                        .ok_or_else(|| BifError::Parse {
                            line: block.line,
                            col: 0,
                            message: format!(
                                "{}: `{state}` is not a state of {}",
                                block.child, variables[parent].name
                            ),
                        })?;
                    idx = idx * parent_cards[slot] as usize + value;
                }
                if rows[idx].is_some() {
                    return Err(BifError::Parse {
                        line: block.line,
                        col: 0,
                        message: format!("{}: duplicate condition {:?}", block.child, states),
                    });
                }
                rows[idx] = Some(normalize_row(values, block.line, &block.child)?);
            }
        }
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.ok_or_else(|| BifError::Parse {
                    line: block.line,
                    col: 0,
                    message: format!("{}: missing probability row {i}", block.child),
                })
            })
            .collect::<Result<_, _>>()?;
        cpts[child] = Some(Cpt {
            node: child,
            cardinality: card,
            parent_order: sorted_parents,
            parent_cardinalities: parent_cards,
            rows,
        });
    }

    let names: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();
    let cardinalities: Vec<u32> = variables.iter().map(|v| v.states.len() as u32).collect();
    let cpts: Vec<Cpt> = cpts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            c.ok_or_else(|| BifError::Parse {
                line: 0,
                col: 0,
                message: format!("no probability block for variable {}", names[i]),
            })
        })
        .collect::<Result<_, _>>()?;
    let dag = Dag::new(names, edges).map_err(|e| BifError::Parse {
        line: 0,
        col: 0,
        message: format!("probability blocks do not form a dag: {e}"),
    })?;
    BayesNet::new(dag, cardinalities, cpts).map_err(|e| BifError::Parse {
        line: 0,
        col: 0,
        message: e.to_string(),
    })
}

pub fn parse_bif(path: &Path) -> Result<BayesNet, BifError> {
    parse_bif_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
network tiny {
}
variable A {
  type discrete [ 2 ] { on, off };
}
variable B {
  type discrete [ 3 ] { low, mid, high };
}
probability ( A ) {
  table 0.3, 0.7;
}
probability ( B | A ) {
  (on) 0.1, 0.2, 0.7;
  (off) 0.5, 0.25, 0.25;
}
"#;

    #[test]
    fn minimal_network_parses() {
        let bn = parse_bif_str(MINIMAL).unwrap();
        assert_eq!(bn.dag.node_count(), 2);
        assert_eq!(bn.dag.edge_count(), 1);
        assert!(bn.dag.has_edge(0, 1));
        assert_eq!(bn.cardinalities, vec![2, 3]);
        assert_eq!(bn.cpts[0].rows[0], vec![0.3, 0.7]);
        assert_eq!(bn.cpts[1].row(&[0]), &[0.1, 0.2, 0.7]);
        assert_eq!(bn.cpts[1].row(&[1]), &[0.5, 0.25, 0.25]);
    }

    #[test]
    fn row_sum_off_by_more_than_tolerance_is_rejected() {
        let text = MINIMAL.replace("0.5, 0.25, 0.25", "0.5, 0.2, 0.2");
        let err = parse_bif_str(&text).unwrap_err();
        assert!(matches!(err, BifError::Parse { .. }), "{err}");
        assert!(err.to_string().contains("sum"));
    }

    #[test]
    fn near_one_rows_are_renormalized_exactly() {
        let text = MINIMAL.replace("0.1, 0.2, 0.7", "0.1000001, 0.2, 0.7");
        let bn = parse_bif_str(&text).unwrap();
        let sum: f64 = bn.cpts[1].row(&[0]).iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn continuous_variables_are_unsupported() {
        let text = r#"
variable X {
  type continuous;
}
"#;
        assert!(matches!(
            parse_bif_str(text),
            Err(BifError::Unsupported { .. })
        ));
    }

    #[test]
    fn missing_row_and_unknown_state_are_parse_errors() {
        let missing = MINIMAL.replace("(off) 0.5, 0.25, 0.25;", "");
        assert!(parse_bif_str(&missing)
            .unwrap_err()
            .to_string()
            .contains("missing"));
        let unknown = MINIMAL.replace("(off)", "(sideways)");
        assert!(parse_bif_str(&unknown)
            .unwrap_err()
            .to_string()
            .contains("sideways"));
    }

    #[test]
    fn multi_parent_rows_index_by_sorted_parent_order() {
        let text = r#"
variable P1 { type discrete [ 2 ] { a, b }; }
variable C { type discrete [ 2 ] { y, n }; }
variable P2 { type discrete [ 2 ] { u, v }; }
probability ( P1 ) { table 0.5, 0.5; }
probability ( P2 ) { table 0.5, 0.5; }
probability ( C | P2, P1 ) {
  (u, a) 0.9, 0.1;
  (u, b) 0.8, 0.2;
  (v, a) 0.7, 0.3;
  (v, b) 0.6, 0.4;
}
"#;
        let bn = parse_bif_str(text).unwrap();
        // node ids: P1=0, C=1, P2=2; parent_order sorted = [0, 2]
        assert_eq!(bn.cpts[1].parent_order, vec![0, 2]);
        // (P1=a, P2=u) = (u, a) row
        assert_eq!(bn.cpts[1].row(&[0, 0]), &[0.9, 0.1]);
        // (P1=b, P2=v) = (v, b) row
        assert_eq!(bn.cpts[1].row(&[1, 1]), &[0.6, 0.4]);
    }

    #[test]
    fn quoted_and_symbolic_states_tokenize() {
        let text = r#"
variable R { type discrete [ 2 ] { "<7.5", ">=7.5" }; }
probability ( R ) { table 0.4, 0.6; }
"#;
        let bn = parse_bif_str(text).unwrap();
        assert_eq!(bn.cardinalities, vec![2]);
    }
}

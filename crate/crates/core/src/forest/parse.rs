use super::{Forest, ForestError, Node};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: label index {index} out of range ({declared} labels declared)")]
    LabelOutOfRange {
        line: usize,
        column: usize,
        index: usize,
        declared: usize,
    },
    #[error("empty forest: expected a `labels` line followed by at least one tree")]
    EmptyForest,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                tokens.push(Token {
                    text: &line[s..i],
                    column: s + 1,
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: &line[s..],
            column: s + 1,
        });
    }
    tokens
}

struct TreeParser<'a> {
    line: usize,
    tokens: Vec<Token<'a>>,
    pos: usize,
    end_column: usize,
    labels: usize,
}

impl<'a> TreeParser<'a> {
    fn syntax(&self, column: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn next(&mut self, expected: &str) -> Result<Token<'a>, ParseError> {
        let tok = self.tokens.get(self.pos).copied().ok_or_else(|| {
            self.syntax(
                self.end_column,
                format!("unexpected end of line, expected {expected}"),
            )
        })?;
        self.pos += 1;
        Ok(tok)
    }

    fn index(&mut self, what: &str) -> Result<(usize, usize), ParseError> {
        let tok = self.next(what)?;
        let value = tok.text.parse::<usize>().map_err(|_| {
            self.syntax(tok.column, format!("expected {what}, found `{}`", tok.text))
        })?;
        Ok((value, tok.column))
    }

    fn node(&mut self) -> Result<Node, ParseError> {
        let tok = self.next("`branch` or `leaf`")?;
        match tok.text {
            "leaf" => {
                let (label, column) = self.index("label index")?;
                if label >= self.labels {
                    return Err(ParseError::LabelOutOfRange {
                        line: self.line,
                        column,
                        index: label,
                        declared: self.labels,
                    });
                }
                Ok(Node::leaf(label))
            }
            "branch" => {
                let (feature, _) = self.index("feature index")?;
                let t = self.next("threshold")?;
                let threshold = t
                    .text
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        self.syntax(
                            t.column,
                            format!("expected decimal threshold, found `{}`", t.text),
                        )
                    })?;
                let left = self.node()?;
                let right = self.node()?;
                Ok(Node::branch(feature, threshold, left, right))
            }
            other => Err(self.syntax(
                tok.column,
                format!("expected `branch` or `leaf`, found `{other}`"),
            )),
        }
    }
}

/// Parses `.forest` text: a `labels` line, then one prefix-form tree per line.
pub fn parse_forest(text: &str) -> Result<Forest, ParseError> {
    let mut labels: Option<Vec<String>> = None;
    let mut trees = Vec::new();

    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        let line_no = i + 1;
        match &labels {
            None => {
                if tokens[0].text != "labels" {
                    return Err(ParseError::Syntax {
                        line: line_no,
                        column: tokens[0].column,
                        message: format!("expected `labels`, found `{}`", tokens[0].text),
                    });
                }
                if tokens.len() < 2 {
                    return Err(ParseError::Syntax {
                        line: line_no,
                        column: line.len() + 1,
                        message: "`labels` needs at least one label name".into(),
                    });
                }
                labels = Some(tokens[1..].iter().map(|t| t.text.to_string()).collect());
            }
            Some(names) => {
                let mut parser = TreeParser {
                    line: line_no,
                    tokens,
                    pos: 0,
                    end_column: line.len() + 1,
                    labels: names.len(),
                };
                let tree = parser.node()?;
                if let Some(extra) = parser.tokens.get(parser.pos) {
                    return Err(parser.syntax(
                        extra.column,
                        format!("trailing token `{}` after complete tree", extra.text),
                    ));
                }
                trees.push(tree);
            }
        }
    }

    let labels = labels.ok_or(ParseError::EmptyForest)?;
    if trees.is_empty() {
        return Err(ParseError::EmptyForest);
    }
    Forest::new(labels, trees).map_err(|e| match e {
        ForestError::NoTrees | ForestError::NoLabels => ParseError::EmptyForest,
        // label ranges and thresholds are validated token by token above
        other => unreachable!("validated during parsing: {other}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_leaf_tree() {
        let forest = parse_forest("labels A B\nleaf 0").unwrap();
        assert_eq!(forest.trees().len(), 1);
        assert_eq!(forest.num_branches(), 0);
        assert_eq!(forest.num_leaves(), 1);
        assert_eq!(forest.labels()[forest.leaves()[0].label], "A");
    }

    #[test]
    fn missing_right_subtree_is_syntax_error() {
        let err = parse_forest("labels A\nbranch 0 3.5 leaf 0").unwrap_err();
        assert!(
            matches!(
                err,
                ParseError::Syntax {
                    line: 2,
                    column: 20,
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn trailing_tokens_rejected() {
        let err = parse_forest("labels A\nleaf 0 leaf 0\n").unwrap_err();
        assert!(
            matches!(
                err,
                ParseError::Syntax {
                    line: 2,
                    column: 8,
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn label_out_of_range_reports_position() {
        let err = parse_forest("labels A B\nbranch 0 1 leaf 0 leaf 2\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::LabelOutOfRange {
                line: 2,
                column: 24,
                index: 2,
                declared: 2
            }
        );
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(parse_forest(""), Err(ParseError::EmptyForest));
        assert_eq!(parse_forest("labels A\n\n"), Err(ParseError::EmptyForest));
    }

    #[test]
    fn first_line_must_declare_labels() {
        let err = parse_forest("leaf 0\n").unwrap_err();
        assert!(matches!(
            err,
            ParseError::Syntax {
                line: 1,
                column: 1,
                ..
            }
        ));
    }

    #[test]
    fn bad_threshold() {
        let err = parse_forest("labels A\nbranch 0 abc leaf 0 leaf 0\n").unwrap_err();
        assert!(
            matches!(
                err,
                ParseError::Syntax {
                    line: 2,
                    column: 10,
                    ..
                }
            ),
            "{err:?}"
        );
        assert!(parse_forest("labels A\nbranch 0 inf leaf 0 leaf 0\n").is_err());
        assert!(parse_forest("labels A\nbranch -1 2 leaf 0 leaf 0\n").is_err());
    }

    #[test]
    fn tolerates_crlf_and_extra_spaces() {
        let forest = parse_forest("labels  A B\r\n  branch 0   1.5 leaf 0 leaf 1 \r\n").unwrap();
        assert_eq!(forest.branches()[0].threshold, 1.5);
    }
}

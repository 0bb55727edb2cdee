//! Recursive-descent parser for pipeline and scenario files. Either the
//! whole file parses or the first problem comes back as an error with its
//! source position.

use super::ast::{MetricKind, PipelineSpec, ScenarioArms, ScenarioAst, Statement, Stmt};
use super::lexer::{lex, Token, TokenKind};
use super::{DslError, Span};
use crate::models::{ForestParams, LogisticParams, ModelSpec};
use crate::split::SplitStrategy;
use crate::transforms::SelectorMethod;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, DslError> {
        Ok(Parser { tokens: lex(text)?, pos: 0 })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek2(&self) -> Option<&Token> {
        self.tokens.get(self.pos + 1)
    }

    fn eof_span(&self) -> Span {
        self.tokens.last().map_or(Span { line: 1, col: 1 }, |t| t.span)
    }

    fn next(&mut self, what: &str) -> Result<Token, DslError> {
        let token = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| DslError::new(format!("unexpected end of file: expected {what}"), self.eof_span()))?;
        self.pos += 1;
        Ok(token)
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Span), DslError> {
        let token = self.next(what)?;
        match token.kind {
            TokenKind::Ident(name) => Ok((name, token.span)),
            _ => Err(DslError::new(format!("expected {what}"), token.span)),
        }
    }

    fn expect_keyword(&mut self, keyword: &str) -> Result<Span, DslError> {
        let (name, span) = self.expect_ident(&format!("'{keyword}'"))?;
        if name != keyword {
            return Err(DslError::new(format!("expected '{keyword}', found '{name}'"), span));
        }
        Ok(span)
    }

    fn expect_str(&mut self, what: &str) -> Result<(String, Span), DslError> {
        let token = self.next(what)?;
        match token.kind {
            TokenKind::Str(value) => Ok((value, token.span)),
            _ => Err(DslError::new(format!("expected {what}"), token.span)),
        }
    }

    fn expect_num(&mut self, what: &str) -> Result<(f64, Span), DslError> {
        let token = self.next(what)?;
        match token.kind {
            TokenKind::Num(value) => Ok((value, token.span)),
            _ => Err(DslError::new(format!("expected {what}"), token.span)),
        }
    }

    fn expect_lbrace(&mut self) -> Result<Span, DslError> {
        let token = self.next("'{'")?;
        match token.kind {
            TokenKind::LBrace => Ok(token.span),
            _ => Err(DslError::new("expected '{'", token.span)),
        }
    }

    fn expect_end(&self) -> Result<(), DslError> {
        if let Some(token) = self.peek() {
            return Err(DslError::new("unexpected content after closing brace", token.span));
        }
        Ok(())
    }

    fn peek_is_num(&self) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Num(_), .. }))
    }

    /// True when the next two tokens are `ident =`, i.e. a key=value pair.
    fn peek_is_pair(&self) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Ident(_), .. }))
            && matches!(self.peek2(), Some(Token { kind: TokenKind::Eq, .. }))
    }

    fn count(&self, value: f64, span: Span, what: &str) -> Result<usize, DslError> {
        if value < 0.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
            return Err(DslError::new(format!("{what} must be a whole non-negative number"), span));
        }
        Ok(value as usize)
    }

    /// One `key=value` pair.
    fn pair(&mut self) -> Result<(String, f64, Span), DslError> {
        let (key, key_span) = self.expect_ident("a parameter name")?;
        let eq = self.next("'='")?;
        if !matches!(eq.kind, TokenKind::Eq) {
            return Err(DslError::new("expected '='", eq.span));
        }
        let (value, _) = self.expect_num(&format!("a value for '{key}'"))?;
        Ok((key, value, key_span))
    }

    fn train_statement(&mut self) -> Result<Stmt, DslError> {
        let (model, model_span) = self.expect_ident("a model name")?;
        let mut pairs = Vec::new();
        while self.peek_is_pair() {
            let (key, value, span) = self.pair()?;
            if pairs.iter().any(|(k, _, _): &(String, f64, Span)| *k == key) {
                return Err(DslError::new(format!("duplicate train parameter '{key}'"), span));
            }
            pairs.push((key, value, span));
        }
        let spec = match model.as_str() {
            "majority" => {
                if let Some((key, _, span)) = pairs.first() {
                    return Err(DslError::new(
                        format!("train majority takes no parameters, found '{key}'"),
                        *span,
                    ));
                }
                ModelSpec::Majority
            }
            "logistic" => {
                let mut params = LogisticParams::default();
                for (key, value, span) in pairs {
                    match key.as_str() {
                        "lr" => params.learning_rate = value,
                        "epochs" => params.epochs = self.count(value, span, "epochs")?,
                        "l2" => params.l2 = value,
                        other => {
                            return Err(DslError::new(
                                format!("unknown train parameter '{other}' for logistic"),
                                span,
                            ))
                        }
                    }
                }
                ModelSpec::Logistic(params)
            }
            "forest" => {
                let mut params = ForestParams::default();
                for (key, value, span) in pairs {
                    match key.as_str() {
                        "trees" => params.n_trees = self.count(value, span, "trees")?,
                        "depth" => params.max_depth = self.count(value, span, "depth")?,
                        "min_leaf" => params.min_samples_leaf = self.count(value, span, "min_leaf")?,
                        other => {
                            return Err(DslError::new(
                                format!("unknown train parameter '{other}' for forest"),
                                span,
                            ))
                        }
                    }
                }
                ModelSpec::Forest(params)
            }
            other => return Err(DslError::new(format!("unknown model '{other}'"), model_span)),
        };
        Ok(Stmt::Train { spec })
    }

    /// Statements until the closing brace, which is consumed; its span is
    /// returned alongside. One `load` and one `split` are allowed per block.
    fn statements(&mut self) -> Result<(Vec<Statement>, Span), DslError> {
        let mut statements = Vec::new();
        let mut seen_load: Option<Span> = None;
        let mut seen_split: Option<Span> = None;
        loop {
            let token = self.next("a statement or '}'")?;
            let span = token.span;
            let keyword = match token.kind {
                TokenKind::RBrace => return Ok((statements, span)),
                TokenKind::Ident(name) => name,
                _ => return Err(DslError::new("expected a statement or '}'", span)),
            };
            let stmt = match keyword.as_str() {
                "load" => {
                    if seen_load.is_some() {
                        return Err(DslError::new("duplicate load statement", span));
                    }
                    seen_load = Some(span);
                    let (path, _) = self.expect_str("a quoted data path")?;
                    Stmt::Load { path }
                }
                "group_by" => {
                    let (key, _) = self.expect_ident("a grouping key")?;
                    Stmt::GroupBy { key }
                }
                "split" => {
                    if seen_split.is_some() {
                        return Err(DslError::new("duplicate split statement", span));
                    }
                    seen_split = Some(span);
                    let (strategy_name, strategy_span) = self.expect_ident("a split strategy")?;
                    let strategy = match strategy_name.as_str() {
                        "random" => SplitStrategy::Random,
                        "stratified" => SplitStrategy::Stratified,
                        "group" => SplitStrategy::Group,
                        other => {
                            return Err(DslError::new(
                                format!("unknown split strategy '{other}'"),
                                strategy_span,
                            ))
                        }
                    };
                    let mut fractions = [0.0; 3];
                    for slot in &mut fractions {
                        if !self.peek_is_num() {
                            return Err(DslError::new("split expects three fractions", span));
                        }
                        *slot = self.expect_num("a fraction")?.0;
                    }
                    Stmt::Split { strategy, fractions }
                }
                "oversample" => Stmt::Oversample,
                "augment" => {
                    let (copies_raw, copies_span) = self.expect_num("a copy count")?;
                    let copies = self.count(copies_raw, copies_span, "augment copies")?;
                    let (sigma_scale, sigma_span) = self.expect_num("a noise scale")?;
                    if sigma_scale < 0.0 {
                        return Err(DslError::new("augment noise scale cannot be negative", sigma_span));
                    }
                    Stmt::Augment { copies, sigma_scale }
                }
                "select" => {
                    let (method_name, method_span) = self.expect_ident("a selection method")?;
                    let method = SelectorMethod::from_name(&method_name).ok_or_else(|| {
                        DslError::new(format!("unknown selection method '{method_name}'"), method_span)
                    })?;
                    let k = if method == SelectorMethod::Variance {
                        if self.peek_is_num() {
                            let (_, bad) = self.expect_num("")?;
                            return Err(DslError::new("select variance takes no count", bad));
                        }
                        None
                    } else {
                        let (raw, k_span) = self.expect_num("a feature count")?;
                        let k = self.count(raw, k_span, "select count")?;
                        if k == 0 {
                            return Err(DslError::new("select count must be at least 1", k_span));
                        }
                        Some(k)
                    };
                    Stmt::Select { method, k }
                }
                "train" => self.train_statement()?,
                "evaluate" => {
                    let mut metrics = Vec::new();
                    while let Some(Token { kind: TokenKind::Ident(name), span }) = self.peek() {
                        let Some(metric) = MetricKind::from_name(name) else { break };
                        if metrics.contains(&metric) {
                            return Err(DslError::new(format!("duplicate metric '{name}'"), *span));
                        }
                        metrics.push(metric);
                        self.pos += 1;
                    }
                    if metrics.is_empty() {
                        return Err(DslError::new("evaluate expects at least one metric", span));
                    }
                    Stmt::Evaluate { metrics }
                }
                "baseline" => {
                    let (kind, kind_span) = self.expect_ident("a baseline kind")?;
                    if kind != "majority" {
                        return Err(DslError::new(format!("unknown baseline '{kind}'"), kind_span));
                    }
                    Stmt::Baseline
                }
                "external_eval" => {
                    let (path, _) = self.expect_str("a quoted data path")?;
                    Stmt::ExternalEval { path }
                }
                other => return Err(DslError::new(format!("unknown statement '{other}'"), span)),
            };
            statements.push(Statement { stmt, span });
        }
    }

    fn block(&mut self, name: String) -> Result<PipelineSpec, DslError> {
        self.expect_lbrace()?;
        let (statements, close_span) = self.statements()?;
        Ok(PipelineSpec { name, statements, close_span })
    }
}

/// Parse a pipeline file: `pipeline "name" { statements }`.
pub fn parse_spec(text: &str) -> Result<PipelineSpec, DslError> {
    let mut parser = Parser::new(text)?;
    parser.expect_keyword("pipeline")?;
    let (name, _) = parser.expect_str("a quoted pipeline name")?;
    let spec = parser.block(name)?;
    parser.expect_end()?;
    Ok(spec)
}

/// Parse a scenario file: a pitfall kind, repetition count, seed, generator
/// knobs, and either a leaky/correct arm pair or one plain pipeline block.
pub fn parse_scenario(text: &str) -> Result<ScenarioAst, DslError> {
    let mut parser = Parser::new(text)?;
    parser.expect_keyword("scenario")?;
    let (name, _) = parser.expect_str("a quoted scenario name")?;
    parser.expect_lbrace()?;

    let mut kind: Option<(String, Span)> = None;
    let mut reps: Option<usize> = None;
    let mut base_seed: Option<u64> = None;
    let mut gen: Vec<(String, f64)> = Vec::new();
    let mut leaky: Option<PipelineSpec> = None;
    let mut correct: Option<PipelineSpec> = None;
    let mut single: Option<PipelineSpec> = None;

    let close_span = loop {
        let token = parser.next("a scenario field or '}'")?;
        let span = token.span;
        let keyword = match token.kind {
            TokenKind::RBrace => break span,
            TokenKind::Ident(name) => name,
            _ => return Err(DslError::new("expected a scenario field or '}'", span)),
        };
        let dup = |what: &str| DslError::new(format!("duplicate '{what}'"), span);
        match keyword.as_str() {
            "kind" => {
                if kind.is_some() {
                    return Err(dup("kind"));
                }
                let (value, value_span) = parser.expect_ident("a pitfall kind")?;
                kind = Some((value, value_span));
            }
            "reps" => {
                if reps.is_some() {
                    return Err(dup("reps"));
                }
                let (raw, raw_span) = parser.expect_num("a repetition count")?;
                let value = parser.count(raw, raw_span, "reps")?;
                if value == 0 {
                    return Err(DslError::new("reps must be at least 1", raw_span));
                }
                reps = Some(value);
            }
            "base_seed" => {
                if base_seed.is_some() {
                    return Err(dup("base_seed"));
                }
                let (raw, raw_span) = parser.expect_num("a seed")?;
                base_seed = Some(parser.count(raw, raw_span, "base_seed")? as u64);
            }
            "gen" => {
                if !parser.peek_is_pair() {
                    return Err(DslError::new("gen expects at least one key=value", span));
                }
                while parser.peek_is_pair() {
                    let (key, value, key_span) = parser.pair()?;
                    if gen.iter().any(|(k, _)| *k == key) {
                        return Err(DslError::new(format!("duplicate gen key '{key}'"), key_span));
                    }
                    gen.push((key, value));
                }
            }
            "leaky" => {
                if leaky.is_some() {
                    return Err(dup("leaky"));
                }
                leaky = Some(parser.block(format!("{name} (leaky)"))?);
            }
            "correct" => {
                if correct.is_some() {
                    return Err(dup("correct"));
                }
                correct = Some(parser.block(format!("{name} (correct)"))?);
            }
            "pipeline" => {
                if single.is_some() {
                    return Err(dup("pipeline"));
                }
                single = Some(parser.block(format!("{name} (pipeline)"))?);
            }
            other => return Err(DslError::new(format!("unknown scenario field '{other}'"), span)),
        }
    };
    parser.expect_end()?;

    let (kind, kind_span) =
        kind.ok_or_else(|| DslError::new("scenario is missing 'kind'", close_span))?;
    let reps = reps.ok_or_else(|| DslError::new("scenario is missing 'reps'", close_span))?;
    let base_seed =
        base_seed.ok_or_else(|| DslError::new("scenario is missing 'base_seed'", close_span))?;
    let arms = match (leaky, correct, single) {
        (Some(leaky), Some(correct), None) => ScenarioArms::Pair { leaky, correct },
        (None, None, Some(pipeline)) => ScenarioArms::Single { pipeline },
        (None, None, None) => {
            return Err(DslError::new(
                "scenario needs either leaky/correct arms or a pipeline block",
                close_span,
            ))
        }
        (Some(_), None, None) | (None, Some(_), None) => {
            return Err(DslError::new("leaky and correct arms must both be present", close_span))
        }
        _ => {
            return Err(DslError::new(
                "scenario mixes a pipeline block with leaky/correct arms",
                close_span,
            ))
        }
    };
    Ok(ScenarioAst { name, kind, kind_span, reps, base_seed, gen, arms })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statements_may_share_a_line() {
        let spec = parse_spec(
            "pipeline \"crowded\" { load \"d.csv\" split stratified 0.6 0.2 0.2 train majority evaluate accuracy baseline majority }",
        )
        .unwrap();
        assert_eq!(spec.statements.len(), 5);
        assert_eq!(spec.name, "crowded");
        assert!(matches!(spec.statements[2].stmt, Stmt::Train { spec: ModelSpec::Majority }));
    }

    #[test]
    fn spans_point_at_statement_keywords() {
        let spec = parse_spec("pipeline \"s\" {\n  load \"a\"\n  oversample\n}").unwrap();
        assert_eq!(spec.statements[0].span, Span { line: 2, col: 3 });
        assert_eq!(spec.statements[1].span, Span { line: 3, col: 3 });
        assert_eq!(spec.close_span, Span { line: 4, col: 1 });
    }

    #[test]
    fn empty_body_parses() {
        let spec = parse_spec("pipeline \"x\" { }").unwrap();
        assert!(spec.statements.is_empty());
    }

    #[test]
    fn split_arity_error_names_the_problem() {
        let err = parse_spec("pipeline \"p\" { split stratified 0.6 0.2 }").unwrap_err();
        assert_eq!(err.message, "split expects three fractions");
        assert_eq!(err.span, Span { line: 1, col: 16 });
    }

    #[test]
    fn duplicate_load_and_split_are_rejected() {
        let err = parse_spec("pipeline \"p\" { load \"a\" load \"b\" }").unwrap_err();
        assert!(err.message.contains("duplicate load"));
        let err =
            parse_spec("pipeline \"p\" { split random 0.6 0.2 0.2 split random 0.5 0.3 0.2 }")
                .unwrap_err();
        assert!(err.message.contains("duplicate split"));
    }

    #[test]
    fn unknown_names_are_errors_with_spans() {
        let err = parse_spec("pipeline \"p\" { shuffle }").unwrap_err();
        assert!(err.message.contains("unknown statement 'shuffle'"));
        let err = parse_spec("pipeline \"p\" { split sorted 0.6 0.2 0.2 }").unwrap_err();
        assert!(err.message.contains("unknown split strategy 'sorted'"));
        let err = parse_spec("pipeline \"p\" { select pca 3 }").unwrap_err();
        assert!(err.message.contains("unknown selection method 'pca'"));
        let err = parse_spec("pipeline \"p\" { train svm }").unwrap_err();
        assert!(err.message.contains("unknown model 'svm'"));
        let err = parse_spec("pipeline \"p\" { baseline random }").unwrap_err();
        assert!(err.message.contains("unknown baseline 'random'"));
    }

    #[test]
    fn select_arity_depends_on_the_method() {
        let spec = parse_spec("pipeline \"p\" { select variance select univariate_f 10 }").unwrap();
        assert!(
            matches!(spec.statements[0].stmt, Stmt::Select { method: SelectorMethod::Variance, k: None })
        );
        assert!(matches!(
            spec.statements[1].stmt,
            Stmt::Select { method: SelectorMethod::UnivariateF, k: Some(10) }
        ));
        let err = parse_spec("pipeline \"p\" { select variance 3 }").unwrap_err();
        assert!(err.message.contains("variance takes no count"));
        let err = parse_spec("pipeline \"p\" { select recursive }").unwrap_err();
        assert!(err.message.contains("expected a feature count"));
        let err = parse_spec("pipeline \"p\" { select recursive 0 }").unwrap_err();
        assert!(err.message.contains("at least 1"));
    }

    #[test]
    fn train_parameters_override_defaults() {
        let spec =
            parse_spec("pipeline \"p\" { train logistic lr=0.5 l2=0.01 train forest trees=10 }")
                .unwrap();
        match &spec.statements[0].stmt {
            Stmt::Train { spec: ModelSpec::Logistic(p) } => {
                assert_eq!(p.learning_rate, 0.5);
                assert_eq!(p.l2, 0.01);
                assert_eq!(p.epochs, LogisticParams::default().epochs);
            }
            other => panic!("wrong statement {other:?}"),
        }
        match &spec.statements[1].stmt {
            Stmt::Train { spec: ModelSpec::Forest(p) } => {
                assert_eq!(p.n_trees, 10);
                assert_eq!(p.max_depth, ForestParams::default().max_depth);
            }
            other => panic!("wrong statement {other:?}"),
        }
    }

    #[test]
    fn train_parameter_misuse_is_rejected() {
        let err = parse_spec("pipeline \"p\" { train majority lr=0.1 }").unwrap_err();
        assert!(err.message.contains("majority takes no parameters"));
        let err = parse_spec("pipeline \"p\" { train logistic trees=5 }").unwrap_err();
        assert!(err.message.contains("unknown train parameter 'trees' for logistic"));
        let err = parse_spec("pipeline \"p\" { train forest trees=2.5 }").unwrap_err();
        assert!(err.message.contains("whole non-negative"));
        let err = parse_spec("pipeline \"p\" { train logistic lr=0.1 lr=0.2 }").unwrap_err();
        assert!(err.message.contains("duplicate train parameter"));
    }

    #[test]
    fn evaluate_needs_known_unique_metrics() {
        let spec = parse_spec("pipeline \"p\" { evaluate accuracy precision recall f1 }").unwrap();
        match &spec.statements[0].stmt {
            Stmt::Evaluate { metrics } => assert_eq!(metrics.len(), 4),
            other => panic!("wrong statement {other:?}"),
        }
        let err = parse_spec("pipeline \"p\" { evaluate }").unwrap_err();
        assert!(err.message.contains("at least one metric"));
        let err = parse_spec("pipeline \"p\" { evaluate accuracy accuracy }").unwrap_err();
        assert!(err.message.contains("duplicate metric"));
        // An unknown ident after one good metric reads as the next statement.
        let err = parse_spec("pipeline \"p\" { evaluate accuracy auroc }").unwrap_err();
        assert!(err.message.contains("unknown statement 'auroc'"));
    }

    #[test]
    fn augment_validates_its_numbers() {
        let err = parse_spec("pipeline \"p\" { augment 2.5 0.1 }").unwrap_err();
        assert!(err.message.contains("whole non-negative"));
        let err = parse_spec("pipeline \"p\" { augment 2 -0.1 }").unwrap_err();
        assert!(err.message.contains("cannot be negative"));
    }

    #[test]
    fn trailing_content_is_rejected() {
        let err = parse_spec("pipeline \"p\" { } pipeline \"q\" { }").unwrap_err();
        assert!(err.message.contains("after closing brace"));
    }

    #[test]
    fn missing_braces_read_as_errors() {
        assert!(parse_spec("pipeline \"p\"").is_err());
        assert!(parse_spec("pipeline \"p\" { load \"x\"").is_err());
        assert!(parse_spec("pipeline p { }").is_err());
    }

    #[test]
    fn scenario_pair_parses() {
        let text = "scenario \"demo\" {\n  kind oversample\n  reps 20\n  base_seed 7\n  gen n=100 minority=10\n  leaky { load \"generated\" oversample split stratified 0.6 0.2 0.2 }\n  correct { load \"generated\" split stratified 0.6 0.2 0.2 oversample }\n}";
        let ast = parse_scenario(text).unwrap();
        assert_eq!(ast.name, "demo");
        assert_eq!(ast.kind, "oversample");
        assert_eq!(ast.reps, 20);
        assert_eq!(ast.base_seed, 7);
        assert_eq!(ast.gen, vec![("n".to_string(), 100.0), ("minority".to_string(), 10.0)]);
        match &ast.arms {
            ScenarioArms::Pair { leaky, correct } => {
                assert_eq!(leaky.name, "demo (leaky)");
                assert_eq!(correct.name, "demo (correct)");
                assert_eq!(leaky.statements.len(), 3);
            }
            other => panic!("wrong arms {other:?}"),
        }
    }

    #[test]
    fn scenario_single_pipeline_parses() {
        let text = "scenario \"probe\" { kind batch reps 1 base_seed 3 pipeline { load \"generated\" train logistic } }";
        let ast = parse_scenario(text).unwrap();
        assert!(matches!(ast.arms, ScenarioArms::Single { .. }));
    }

    #[test]
    fn scenario_field_validation() {
        let err = parse_scenario("scenario \"s\" { kind x reps 5 pipeline { } }").unwrap_err();
        assert!(err.message.contains("missing 'base_seed'"));
        let err = parse_scenario("scenario \"s\" { kind x base_seed 1 pipeline { } }").unwrap_err();
        assert!(err.message.contains("missing 'reps'"));
        let err = parse_scenario(
            "scenario \"s\" { kind x reps 1 base_seed 1 pipeline { } leaky { } correct { } }",
        )
        .unwrap_err();
        assert!(err.message.contains("mixes"));
        let err =
            parse_scenario("scenario \"s\" { kind x reps 1 base_seed 1 leaky { } }").unwrap_err();
        assert!(err.message.contains("both be present"));
        let err = parse_scenario("scenario \"s\" { kind x reps 1 base_seed 1 }").unwrap_err();
        assert!(err.message.contains("either leaky/correct"));
        let err = parse_scenario(
            "scenario \"s\" { kind x reps 1 base_seed 1 gen a=1 gen a=2 pipeline { } }",
        )
        .unwrap_err();
        assert!(err.message.contains("duplicate gen key 'a'"));
        let err = parse_scenario("scenario \"s\" { flavor x }").unwrap_err();
        assert!(err.message.contains("unknown scenario field 'flavor'"));
    }
}

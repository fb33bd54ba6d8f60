//! End-to-end query answering: expand, rewrite, evaluate and, on request,
//! compare against the exact answers.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::compile::{attach_residues, compile, ResidueTable};
use crate::error::{Error, Result};
use crate::eval::{evaluate, extension_stats, precision_recall, AnswerSet, CostModel, ExtensionStore};
use crate::expand::{expand_query, set_level_bounds, ExpandedSet};
use crate::model::{Const, Database, Query};
use crate::transform::{greedy_transform, refinement_program, RefineOptions, RewriteConfig, RewriteOutcome};
use crate::validate::{validate_database, validate_query};

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub rewrite: RewriteConfig,
    /// Also evaluate the original query and report precision and recall.
    pub compare: bool,
    /// Compute a refined correctness bound for each answer when there are
    /// at most this many answers.
    pub refine_limit: usize,
    pub refine: RefineOptions,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            rewrite: RewriteConfig::default(),
            compare: false,
            refine_limit: 1000,
            refine: RefineOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnswerReport {
    pub tuple: Vec<String>,
    #[serde(skip)]
    pub values: Vec<Const>,
    /// Indices of the rewritings that return this answer.
    #[serde(skip)]
    pub rewrites: Vec<usize>,
    /// Refined lower bound on the belief that this answer is correct.
    pub correctness: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub exact_answers: usize,
    pub precision: f64,
    pub recall: f64,
    pub t_original_ms: f64,
    /// `(t_o - t_r) / t_o`.
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionReport {
    pub query: String,
    /// Rendered expansion tree; a single unchanged query when the body
    /// has no intensional atoms.
    pub expansion: String,
    /// One rewriting per query of the expanded set.
    pub rewrites: Vec<RewriteOutcome>,
    /// Removal bound of the expansion step, per rewriting.
    pub expansion_bounds: Vec<f64>,
    pub corr: f64,
    pub comp: f64,
    pub answers: Vec<AnswerReport>,
    pub t_rewritten_ms: f64,
    pub comparison: Option<Comparison>,
}

impl SessionReport {
    pub fn rewritten_queries(&self) -> Vec<&Query> {
        self.rewrites.iter().map(|o| &o.rewritten).collect()
    }
}

impl fmt::Display for SessionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "query:     {}", self.query)?;
        for o in &self.rewrites {
            writeln!(f, "rewritten: {}", o.rewritten)?;
            for step in &o.log {
                writeln!(f, "  {step}")?;
            }
        }
        writeln!(f, "corr >= {:.6}  comp >= {:.6}", self.corr, self.comp)?;
        writeln!(f, "answers:   {} in {:.3} ms", self.answers.len(), self.t_rewritten_ms)?;
        for a in &self.answers {
            match a.correctness {
                Some(c) => writeln!(f, "  ({})  {c:.6}", a.tuple.join(", "))?,
                None => writeln!(f, "  ({})", a.tuple.join(", "))?,
            }
        }
        if let Some(c) = &self.comparison {
            writeln!(
                f,
                "exact:     {} answers in {:.3} ms; precision {:.6}, recall {:.6}, speedup {:.3}",
                c.exact_answers, c.t_original_ms, c.precision, c.recall, c.speedup
            )?;
        }
        Ok(())
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// A validated database together with its extensions, statistics and
/// compiled residues.
#[derive(Debug)]
pub struct Session {
    pub db: Database,
    pub store: ExtensionStore,
    pub cost: CostModel,
    pub table: ResidueTable,
}

fn invalid(report: crate::validate::ValidationReport) -> Error {
    Error::Invalid(report.errors.iter().map(ToString::to_string).collect())
}

impl Session {
    pub fn new(db: Database) -> Result<Session> {
        let report = validate_database(&db);
        if !report.is_ok() {
            return Err(invalid(report));
        }
        let store = ExtensionStore::from_database(&db)?;
        let cost = extension_stats(&db, &store);
        let table = compile(&db);
        Ok(Session { db, store, cost, table })
    }

    /// Expand `q` over its intensional predicates and rewrite each expanded
    /// query.
    pub fn rewrite(&self, q: &Query, cfg: &RewriteConfig) -> Result<(ExpandedSet, Vec<RewriteOutcome>)> {
        let report = validate_query(&self.db, q);
        if !report.is_ok() {
            return Err(invalid(report));
        }
        let expanded = expand_query(q, &self.db, &self.table, cfg)?;
        let outcomes = expanded
            .queries
            .iter()
            .map(|st| {
                let residues = attach_residues(&st.query, &self.table, &self.db);
                greedy_transform(&st.query, &residues, cfg, &self.cost)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((expanded, outcomes))
    }

    pub fn run(&self, q: &Query, cfg: &SessionConfig) -> Result<SessionReport> {
        let start = Instant::now();
        let (expanded, outcomes) = self.rewrite(q, &cfg.rewrite)?;
        let mut union = AnswerSet::new(&q.name, q.output_vars.len());
        let mut origin: BTreeMap<Vec<Const>, Vec<usize>> = BTreeMap::new();
        for (i, o) in outcomes.iter().enumerate() {
            for t in evaluate(&o.rewritten, &self.store)?.tuples {
                origin.entry(t.clone()).or_default().push(i);
                union.tuples.insert(t);
            }
        }
        let t_r = start.elapsed();

        let bounds: Vec<f64> = expanded.queries.iter().map(|st| st.bound).collect();
        let (corr, comp) = set_level_bounds(outcomes.iter().zip(&bounds).map(|(o, b)| (b * o.corr, o.comp)))?;

        let refine = union.len() <= cfg.refine_limit;
        let mut answers = Vec::with_capacity(union.len());
        for (t, from) in &origin {
            let correctness = if refine {
                let mut best: f64 = 0.0;
                for &i in from {
                    let p = refinement_program(t, &outcomes[i], &self.store, &self.db, cfg.refine)?;
                    best = best.max(bounds[i] * p.belief(cfg.rewrite.phi)?);
                }
                Some(best)
            } else {
                None
            };
            answers.push(AnswerReport {
                tuple: t.iter().map(ToString::to_string).collect(),
                values: t.clone(),
                rewrites: from.clone(),
                correctness,
            });
        }

        let comparison = if cfg.compare {
            let start = Instant::now();
            let exact = evaluate(q, &self.store)?;
            let t_o = start.elapsed();
            let (precision, recall) = precision_recall(&exact, &union)?;
            let t_o_ms = ms(t_o);
            Some(Comparison {
                exact_answers: exact.len(),
                precision,
                recall,
                t_original_ms: t_o_ms,
                speedup: if t_o_ms > 0.0 { (t_o_ms - ms(t_r)) / t_o_ms } else { 0.0 },
            })
        } else {
            None
        };

        let expansion = expanded.render();
        Ok(SessionReport {
            query: q.to_string(),
            expansion,
            rewrites: outcomes,
            expansion_bounds: bounds,
            corr,
            comp,
            answers,
            t_rewritten_ms: ms(t_r),
            comparison,
        })
    }

    /// Proof DAG in DOT for one answer of the rewriting at `index`.
    pub fn explain(&self, answer: &[Const], outcome: &RewriteOutcome, opts: RefineOptions) -> Result<String> {
        let p = refinement_program(answer, outcome, &self.store, &self.db, opts)?;
        Ok(p.proof_dag()?.to_dot())
    }

    /// Rendered dump of every compiled residue.
    pub fn residues(&self) -> String {
        self.table.dump()
    }

    pub fn describe_rewrites(outcomes: &[RewriteOutcome]) -> String {
        let mut out = String::new();
        for o in outcomes {
            let _ = write!(out, "{}", o.report());
        }
        out
    }
}

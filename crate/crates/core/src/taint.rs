//! Forward may-taint analysis from spec sources to spec sinks over the
//! lowered program model.
//!
//! Each tainted variable carries, per origin, one witness path: the shortest
//! (then lexicographically smallest) sequence of steps that reached it. An
//! origin is either a source call or, while summarising a callee, one of its
//! parameters. Project calls are followed through memoised summaries up to
//! the configured depth.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::labels::Label;
use crate::program::{CallSite, MethodModel, ProgramModel, Statement, StatementKind, CONSTRUCTOR_NAME};
use crate::specgen::{FlowOut, MatchMode, MethodPattern, PatternParts, TaintSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// 0 analyses each method on its own.
    pub max_call_depth: usize,
    /// `name_and_arity` loosens every pattern to name and arity matching.
    pub match_mode: MatchMode,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            max_call_depth: 2,
            match_mode: MatchMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub uri: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub uri: String,
    pub line: u32,
    pub description: String,
}

impl PathStep {
    pub fn location(&self) -> Location {
        Location {
            uri: self.uri.clone(),
            line: self.line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub spec_id: String,
    pub cwe: Label,
    pub source_location: Location,
    pub sink_location: Location,
    /// From the source step to the sink step.
    pub path: Vec<PathStep>,
    pub message: String,
}

impl Finding {
    fn sort_key(&self) -> (&str, u32, u32, &str, &str) {
        (
            &self.sink_location.uri,
            self.source_location.line,
            self.sink_location.line,
            &self.spec_id,
            &self.source_location.uri,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Origin {
    Source(PathStep),
    Parameter(usize),
}

type Path = Vec<PathStep>;

/// Origins of one variable's taint with a witness path each.
pub type Taint = BTreeMap<Origin, Path>;

fn better(a: &Path, b: &Path) -> bool {
    (a.len(), a) < (b.len(), b)
}

fn join_taint(into: &mut Taint, other: &Taint) {
    for (o, p) in other {
        match into.get(o) {
            Some(q) if !better(p, q) => {}
            _ => {
                into.insert(o.clone(), p.clone());
            }
        }
    }
}

fn extend(t: &Taint, step: &PathStep) -> Taint {
    t.iter()
        .map(|(o, p)| {
            let mut p = p.clone();
            p.push(step.clone());
            (o.clone(), p)
        })
        .collect()
}

/// Tainted variables at one program point.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintState {
    pub vars: BTreeMap<String, Taint>,
}

impl TaintState {
    pub fn is_tainted(&self, var: &str) -> bool {
        self.vars.contains_key(var)
    }

    pub fn tainted(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    /// The step each origin of `var` started from.
    pub fn provenance(&self, var: &str) -> Vec<&PathStep> {
        self.vars
            .get(var)
            .into_iter()
            .flat_map(|t| t.values().filter_map(|p| p.first()))
            .collect()
    }

    fn get(&self, var: &str) -> Option<&Taint> {
        self.vars.get(var)
    }

    fn of(&self, vars: impl IntoIterator<Item = impl AsRef<str>>) -> Taint {
        let mut t = Taint::new();
        for v in vars {
            if let Some(x) = self.vars.get(v.as_ref()) {
                join_taint(&mut t, x);
            }
        }
        t
    }

    fn set(&mut self, var: &str, t: Taint) {
        if t.is_empty() {
            self.vars.remove(var);
        } else {
            self.vars.insert(var.to_string(), t);
        }
    }

    fn add(&mut self, var: &str, t: &Taint) {
        if !t.is_empty() {
            join_taint(self.vars.entry(var.to_string()).or_default(), t);
        }
    }

    fn join(&mut self, other: &TaintState) {
        for (v, t) in &other.vars {
            self.add(v, t);
        }
    }
}

fn matches_parts(c: &CallSite, parts: &PatternParts, signature: &str, mode: MatchMode) -> bool {
    if mode == MatchMode::Exact {
        if let Some(resolved) = &c.resolved_signature {
            return resolved == signature;
        }
    }
    if c.callee_name != parts.name || c.arity() != parts.arity {
        return false;
    }
    if c.callee_name == CONSTRUCTOR_NAME {
        // Every constructor shares one name, so the created type must agree.
        let hint = c.receiver_type_hint.as_deref().map(crate::program::erase_type);
        let hint = hint.as_deref().map(|h| h.rsplit('.').next().unwrap_or(h));
        if let (Some(h), Some(class)) = (hint, parts.simple_class()) {
            return h == class;
        }
    }
    true
}

/// Exact: the resolved signature equals the pattern, or for an unresolved
/// call the name and arity agree. Name-and-arity: name and arity only.
pub fn match_pattern(c: &CallSite, p: &MethodPattern) -> bool {
    match p.parts() {
        Ok(parts) => matches_parts(c, &parts, &p.signature, p.match_mode),
        Err(_) => false,
    }
}

struct Compiled<'s> {
    spec: &'s TaintSpec,
    sources: Vec<(PatternParts, &'s MethodPattern, FlowOut)>,
    sinks: Vec<(PatternParts, &'s MethodPattern, &'s [usize])>,
    sanitizers: Vec<(PatternParts, &'s MethodPattern, &'s [usize], FlowOut)>,
    propagators: Vec<(PatternParts, &'s MethodPattern, &'s [usize], FlowOut)>,
}

impl<'s> Compiled<'s> {
    fn new(spec: &'s TaintSpec) -> Self {
        let parts = |p: &MethodPattern| p.parts().ok();
        Compiled {
            spec,
            sources: spec
                .sources
                .iter()
                .filter_map(|r| Some((parts(&r.pattern)?, &r.pattern, r.out)))
                .collect(),
            sinks: spec
                .sinks
                .iter()
                .filter_map(|r| Some((parts(&r.pattern)?, &r.pattern, r.inputs.as_slice())))
                .collect(),
            sanitizers: spec
                .sanitizers
                .iter()
                .filter_map(|r| Some((parts(&r.pattern)?, &r.pattern, r.inputs.as_slice(), r.out)))
                .collect(),
            propagators: spec
                .propagators
                .iter()
                .filter_map(|r| Some((parts(&r.pattern)?, &r.pattern, r.inputs.as_slice(), r.out)))
                .collect(),
        }
    }
}

fn effective(p: &MethodPattern, cfg: &AnalysisConfig) -> MatchMode {
    if cfg.match_mode == MatchMode::NameAndArity {
        MatchMode::NameAndArity
    } else {
        p.match_mode
    }
}

/// Data-in to data-out behaviour of a project method for one spec.
#[derive(Debug, Clone, Default)]
struct Summary {
    /// Taint of the returned value; parameter origins have callee-local paths.
    returns: Taint,
    /// Parameter index and callee-local path ending at a sink.
    param_sinks: BTreeMap<(usize, Path), ()>,
}

type MemoKey = (String, usize, usize);

struct Engine<'a> {
    program: &'a ProgramModel,
    specs: Vec<Compiled<'a>>,
    cfg: AnalysisConfig,
    memo: Mutex<HashMap<MemoKey, Arc<Summary>>>,
}

/// Per-method result of one walk.
#[derive(Default)]
struct Walk {
    findings: BTreeMap<(Location, Location), Path>,
    param_sinks: BTreeMap<(usize, Path), ()>,
    returns: Taint,
    max_iterations: usize,
}

impl Walk {
    fn hit(&mut self, origin: &Origin, path: Path) {
        match origin {
            Origin::Source(src) => {
                let sink = path.last().expect("sink step").location();
                let key = (src.location(), sink);
                match self.findings.get(&key) {
                    Some(q) if !better(&path, q) => {}
                    _ => {
                        self.findings.insert(key, path);
                    }
                }
            }
            Origin::Parameter(i) => {
                self.param_sinks.insert((*i, path), ());
            }
        }
    }
}

struct Frame<'e, 'a> {
    engine: &'e Engine<'a>,
    spec: usize,
    method: &'a MethodModel,
    remaining: usize,
    cap: usize,
}

fn step(uri: &str, line: u32, role: Option<&str>, text: &str) -> PathStep {
    PathStep {
        uri: uri.to_string(),
        line,
        description: match role {
            Some(r) => format!("{r}: {}", text.trim()),
            None => text.trim().to_string(),
        },
    }
}

impl<'e, 'a> Frame<'e, 'a> {
    fn compiled(&self) -> &Compiled<'a> {
        &self.engine.specs[self.spec]
    }

    fn block(&self, stmts: &[Statement], mut state: TaintState, walk: &mut Walk) -> TaintState {
        for s in stmts {
            state = self.statement(s, state, walk);
        }
        state
    }

    fn statement(&self, s: &Statement, state: TaintState, walk: &mut Walk) -> TaintState {
        let uri = &self.method.uri;
        match s.kind {
            StatementKind::If => {
                let mut then = self.block(&s.children, state.clone(), walk);
                let other = match s.branches.first() {
                    Some(b) => self.block(&b.body, state, walk),
                    None => state,
                };
                then.join(&other);
                then
            }
            StatementKind::Loop => self.fixed_point(s, state, walk),
            StatementKind::TryCatch => {
                let mut seen = state.clone();
                let mut cur = state;
                for c in &s.children {
                    cur = self.statement(c, cur, walk);
                    seen.join(&cur);
                }
                let mut exit = cur;
                for b in &s.branches {
                    let mut entry = seen.clone();
                    for d in &b.defs {
                        entry.set(d, Taint::new());
                    }
                    let out = self.block(&b.body, entry, walk);
                    exit.join(&out);
                }
                exit
            }
            StatementKind::Return => {
                let t = extend(&state.of(&s.uses), &step(uri, s.line, None, &s.text));
                join_taint(&mut walk.returns, &t);
                state
            }
            StatementKind::Opaque => {
                let t = extend(&state.of(&s.uses), &step(uri, s.line, None, &s.text));
                let mut state = state;
                for d in &s.defs {
                    state.add(d, &t);
                }
                state
            }
            _ => match &s.call {
                Some(c) => self.call(s, c, state, walk),
                None => {
                    let t = extend(&state.of(&s.uses), &step(uri, s.line, None, &s.text));
                    let mut state = state;
                    for d in &s.defs {
                        state.set(d, t.clone());
                    }
                    state
                }
            },
        }
    }

    /// Iterates the loop body until the state at the loop head is stable.
    fn fixed_point(&self, s: &Statement, pre: TaintState, walk: &mut Walk) -> TaintState {
        let uri = &self.method.uri;
        let header = step(uri, s.line, None, &s.text);
        let mut head = pre.clone();
        let mut iterations = 0;
        loop {
            iterations += 1;
            let mut entry = head.clone();
            if !s.defs.is_empty() {
                let t = extend(&entry.of(&s.uses), &header);
                for d in &s.defs {
                    entry.set(d, t.clone());
                }
            }
            let out = self.block(&s.children, entry, walk);
            let mut next = pre.clone();
            next.join(&out);
            if next == head || iterations >= self.cap {
                walk.max_iterations = walk.max_iterations.max(iterations);
                return next;
            }
            head = next;
        }
    }

    fn call(&self, s: &Statement, c: &CallSite, mut state: TaintState, walk: &mut Walk) -> TaintState {
        let uri = &self.method.uri;
        let spec = self.compiled();
        let cfg = &self.engine.cfg;
        let matches = |parts: &PatternParts, p: &MethodPattern| matches_parts(c, parts, &p.signature, effective(p, cfg));
        let arg = |i: usize| c.argument_vars.get(i).and_then(|v| v.as_deref());
        let positions = |inputs: &[usize]| -> Vec<usize> {
            if inputs.is_empty() {
                (0..c.arity()).collect()
            } else {
                inputs.to_vec()
            }
        };

        let mut matched = false;
        for (parts, p, inputs) in &spec.sinks {
            if !matches(parts, p) {
                continue;
            }
            matched = true;
            let sink_step = step(uri, c.line, Some("sink"), &s.text);
            for i in positions(inputs) {
                if let Some(t) = arg(i).and_then(|v| state.get(v)) {
                    for (o, path) in t {
                        let mut path = path.clone();
                        path.push(sink_step.clone());
                        walk.hit(o, path);
                    }
                }
            }
        }
        let sources: Vec<FlowOut> = spec
            .sources
            .iter()
            .filter(|(parts, p, _)| matches(parts, p))
            .map(|(_, _, out)| *out)
            .collect();
        let sanitizers: Vec<FlowOut> = spec
            .sanitizers
            .iter()
            .filter(|(parts, p, _, _)| matches(parts, p))
            .map(|(_, _, _, out)| *out)
            .collect();
        let propagators: Vec<(&[usize], FlowOut)> = spec
            .propagators
            .iter()
            .filter(|(parts, p, _, _)| matches(parts, p))
            .map(|(_, _, inputs, out)| (*inputs, *out))
            .collect();
        matched |= !sources.is_empty() || !sanitizers.is_empty() || !propagators.is_empty();

        let call_step = step(uri, c.line, None, &s.text);
        let callee = c
            .resolved_signature
            .as_deref()
            .and_then(|sig| self.engine.program.lookup(sig).map(|m| (sig, m)))
            .filter(|(_, m)| m.has_body);
        let result = match callee {
            Some((sig, _)) if !matched && self.remaining > 0 => {
                let summary = self.engine.summary(sig, self.spec, self.remaining - 1);
                let mut r = Taint::new();
                for (o, q) in &summary.returns {
                    match o {
                        Origin::Parameter(i) => {
                            if let Some(t) = arg(*i).and_then(|v| state.get(v)) {
                                for (o2, p) in t {
                                    let mut path = p.clone();
                                    path.push(call_step.clone());
                                    path.extend(q.iter().cloned());
                                    join_taint(&mut r, &Taint::from([(o2.clone(), path)]));
                                }
                            }
                        }
                        Origin::Source(_) => {
                            let mut path = q.clone();
                            path.push(call_step.clone());
                            join_taint(&mut r, &Taint::from([(o.clone(), path)]));
                        }
                    }
                }
                for (i, q) in summary.param_sinks.keys() {
                    if let Some(t) = arg(*i).and_then(|v| state.get(v)) {
                        for (o, p) in t {
                            let mut path = p.clone();
                            path.push(call_step.clone());
                            path.extend(q.iter().cloned());
                            walk.hit(o, path);
                        }
                    }
                }
                r
            }
            _ => {
                let used = c.receiver_var.iter().chain(c.argument_vars.iter().flatten());
                extend(&state.of(used), &call_step)
            }
        };
        let pre = state.clone();
        for d in &s.defs {
            state.set(d, result.clone());
        }
        let target = |out: FlowOut| -> Option<&str> {
            match out {
                FlowOut::Return => c.result_var.as_deref(),
                FlowOut::Parameter(i) => arg(i),
            }
        };
        for (inputs, out) in propagators {
            let t = extend(&pre.of(positions(inputs).into_iter().filter_map(arg)), &call_step);
            if let Some(v) = target(out) {
                state.add(v, &t);
            }
        }
        for out in sources {
            let src = step(uri, c.line, Some("source"), &s.text);
            if let Some(v) = target(out) {
                state.add(v, &Taint::from([(Origin::Source(src.clone()), vec![src])]));
            }
        }
        for out in sanitizers {
            if let Some(v) = target(out) {
                state.set(v, Taint::new());
            }
        }
        state
    }
}

impl<'a> Engine<'a> {
    fn new(program: &'a ProgramModel, specs: &'a [TaintSpec], cfg: AnalysisConfig) -> Self {
        Engine {
            program,
            specs: specs.iter().map(Compiled::new).collect(),
            cfg,
            memo: Mutex::new(HashMap::new()),
        }
    }

    fn walk(&self, method: &'a MethodModel, spec: usize, remaining: usize, entry: TaintState) -> Walk {
        let frame = Frame {
            engine: self,
            spec,
            method,
            remaining,
            cap: method.statements().count() + 1,
        };
        let mut walk = Walk::default();
        frame.block(&method.body, entry, &mut walk);
        walk
    }

    /// Summaries depend only on their key, so a concurrent duplicate
    /// computation yields the same value.
    fn summary(&self, signature: &str, spec: usize, remaining: usize) -> Arc<Summary> {
        let key = (signature.to_string(), spec, remaining);
        if let Some(s) = self.memo.lock().expect("memo lock").get(&key) {
            return s.clone();
        }
        let method = self.program.lookup(signature).expect("summarised method exists");
        let mut entry = TaintState::default();
        for (i, p) in method.parameters.iter().enumerate() {
            entry.set(&p.name, Taint::from([(Origin::Parameter(i), Vec::new())]));
        }
        let walk = self.walk(method, spec, remaining, entry);
        let summary = Arc::new(Summary {
            returns: walk.returns,
            param_sinks: walk.param_sinks,
        });
        self.memo
            .lock()
            .expect("memo lock")
            .entry(key)
            .or_insert(summary)
            .clone()
    }

    fn findings(&self, method: &'a MethodModel, spec: usize) -> (Vec<Finding>, usize) {
        let walk = self.walk(method, spec, self.cfg.max_call_depth, TaintState::default());
        let s = self.specs[spec].spec;
        let findings = walk
            .findings
            .into_iter()
            .map(|((source_location, sink_location), path)| Finding {
                spec_id: s.id.clone(),
                cwe: s.cwe,
                source_location,
                sink_location,
                path,
                message: s.message.clone(),
            })
            .collect();
        (findings, walk.max_iterations)
    }
}

/// Sorts by (uri, source line, sink line, spec id) and keeps one finding per
/// key, preferring the shortest path.
fn finish(mut findings: Vec<Finding>) -> Vec<Finding> {
    findings.sort_by(|a, b| {
        a.sort_key()
            .cmp(&b.sort_key())
            .then_with(|| (a.path.len(), &a.path).cmp(&(b.path.len(), &b.path)))
    });
    findings.dedup_by(|later, earlier| later.sort_key() == earlier.sort_key());
    findings
}

/// Findings of one method plus the largest number of fixed-point iterations
/// any loop needed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodAnalysis {
    pub findings: Vec<Finding>,
    pub loop_iterations: usize,
}

pub fn analyze_method_detailed(
    m: &MethodModel,
    specs: &[TaintSpec],
    p: &ProgramModel,
    cfg: &AnalysisConfig,
) -> MethodAnalysis {
    let engine = Engine::new(p, specs, *cfg);
    let mut findings = Vec::new();
    let mut loop_iterations = 0;
    for i in 0..specs.len() {
        let (f, it) = engine.findings(m, i);
        findings.extend(f);
        loop_iterations = loop_iterations.max(it);
    }
    MethodAnalysis {
        findings: finish(findings),
        loop_iterations,
    }
}

pub fn analyze_method(
    m: &MethodModel,
    specs: &[TaintSpec],
    p: &ProgramModel,
    cfg: &AnalysisConfig,
) -> Vec<Finding> {
    analyze_method_detailed(m, specs, p, cfg).findings
}

/// Every method against every spec, in parallel, with one shared summary table.
pub fn analyze_program(p: &ProgramModel, specs: &[TaintSpec], cfg: &AnalysisConfig) -> Vec<Finding> {
    let engine = Engine::new(p, specs, *cfg);
    let jobs: Vec<(&MethodModel, usize)> = p
        .methods()
        .filter(|(_, m)| m.has_body)
        .flat_map(|(_, m)| (0..specs.len()).map(move |s| (m, s)))
        .collect();
    let findings: Vec<Finding> = jobs
        .par_iter()
        .flat_map_iter(|(m, s)| engine.findings(m, *s).0)
        .collect();
    finish(findings)
}

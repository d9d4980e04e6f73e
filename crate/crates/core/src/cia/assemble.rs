use num_complex::Complex64;
use serde::Serialize;

use super::config::{CiaConfig, CurrentLimit, Direction, ProxyForm, QMode};
use super::problem::{Constraint, ConvexProblem, LinExpr};
use super::CiaError;
use crate::feeder::SinglePhaseFeeder;
use crate::sensitivity::{SensitivityMatrices, TaylorPoint};

/// Variable indices of one non-slack bus and the branch feeding it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeVars {
    pub p: Option<usize>,
    pub q: Option<usize>,
    pub p_plus: usize,
    pub p_minus: usize,
    pub q_plus: usize,
    pub q_minus: usize,
    pub v_plus: usize,
    pub v_minus: usize,
    pub l_plus: usize,
    pub l_minus: usize,
    pub t: usize,
}

/// Number of scalar variables and constraints by role.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ProblemSize {
    pub injections: usize,
    pub proxies: usize,
    pub auxiliaries: usize,
    pub propagation: usize,
    pub affine_current: usize,
    pub abs_terms: usize,
    pub quadratic_terms: usize,
    pub quad_links: usize,
    pub bounds: usize,
    pub capacity: usize,
    pub sign: usize,
}

/// An assembled hosting-capacity program for one phase and direction.
#[derive(Debug, Clone)]
pub struct CiaProblem {
    pub problem: ConvexProblem,
    /// Indexed by feeder bus; `None` at the slack.
    pub vars: Vec<Option<NodeVars>>,
    pub direction: Direction,
    /// Squared slack voltage.
    pub base_voltage: f64,
    pub load: Vec<Complex64>,
    pub weights: Vec<f64>,
    /// Squared-voltage bounds per bus (`None` where the phase is absent).
    pub v_bounds: Vec<Option<(f64, f64)>>,
    /// Squared-current cap per branch, indexed by the bus it feeds.
    pub l_cap: Vec<Option<f64>>,
    pub size: ProblemSize,
}

impl CiaProblem {
    /// Squared voltage proxy expression (a constant at the slack).
    fn v_expr(&self, node: usize, upper: bool) -> LinExpr {
        match self.vars[node] {
            Some(v) => LinExpr::var(if upper { v.v_plus } else { v.v_minus }),
            None => LinExpr::constant(self.base_voltage),
        }
    }
}

/// Per-bus apparent-power cap in pu; a bus rating takes precedence over the
/// configured default.
pub(super) fn s_caps(sp: &SinglePhaseFeeder, cfg: &CiaConfig) -> Vec<Option<f64>> {
    (0..sp.len())
        .map(|n| sp.s_max[n].or(cfg.s_max_mva.map(|s| s / sp.phase_base_mw)))
        .collect()
}

pub(super) fn current_caps(sp: &SinglePhaseFeeder, tp: &TaylorPoint, positions: &[Option<usize>], cfg: &CiaConfig) -> Vec<Option<f64>> {
    let n = sp.len();
    let l0 = |node: usize| positions[node].map(|k| tp.branches[k].l0).unwrap_or(0.0);
    match &cfg.l_max {
        CurrentLimit::None => vec![None; n],
        CurrentLimit::Uniform(l) => (0..n).map(|node| positions[node].map(|_| *l)).collect(),
        CurrentLimit::PerBranch(v) => v.clone(),
        CurrentLimit::BaseCurrentMultiple(k) => {
            let largest = (0..n).map(l0).fold(0.0, f64::max);
            (0..n)
                .map(|node| {
                    positions[node].map(|_| {
                        let base = if l0(node) > 0.0 { l0(node) } else { largest };
                        k * k * base
                    })
                })
                .map(|cap| cap.filter(|c| *c > 0.0))
                .collect()
        }
    }
}

/// Builds the proxy program: propagation equalities, the affine lower and
/// quadratic upper current bounds, voltage/current limits and the
/// apparent-power cap. The objective is `∓Σ wᵢ pᵢ` (the solver minimises).
pub fn assemble_problem(
    sp: &SinglePhaseFeeder,
    sm: &SensitivityMatrices,
    tp: &TaylorPoint,
    cfg: &CiaConfig,
) -> Result<CiaProblem, CiaError> {
    let n = sp.len();
    if sm.position.len() != n || tp.branches.len() != sm.dim() {
        return Err(CiaError::DimensionMismatch {
            what: "sensitivity matrices or Taylor point",
            expected: n,
        });
    }
    cfg.validate(sp)?;
    let topo = &sp.topology;
    let root = topo.root();
    let weights = cfg.weights.resolve(sp);
    let mut pb = ConvexProblem::default();
    let mut size = ProblemSize::default();

    let mut vars: Vec<Option<NodeVars>> = vec![None; n];
    for node in 0..n {
        if node == root {
            continue;
        }
        let id = sp.bus_ids[node];
        let p = sp.active[node].then(|| pb.add_var(format!("p[{id}]")));
        let q = (sp.active[node] && cfg.q_mode == QMode::FreeWithinCone).then(|| pb.add_var(format!("q[{id}]")));
        size.injections += p.is_some() as usize + q.is_some() as usize;
        let mut proxy = |name: &str| pb.add_var(format!("{name}[{id}]"));
        vars[node] = Some(NodeVars {
            p,
            q,
            p_plus: proxy("P+"),
            p_minus: proxy("P-"),
            q_plus: proxy("Q+"),
            q_minus: proxy("Q-"),
            v_plus: proxy("V+"),
            v_minus: proxy("V-"),
            l_plus: proxy("l+"),
            l_minus: proxy("l-"),
            t: proxy("t"),
        });
        size.proxies += 8;
        size.auxiliaries += 1;
    }

    let v_bounds: Vec<Option<(f64, f64)>> = (0..n)
        .map(|node| sp.active[node].then(|| (cfg.v_min.get(node).powi(2), cfg.v_max.get(node).powi(2))))
        .collect();
    let l_cap = current_caps(sp, tp, &sm.position, cfg);
    let mut out = CiaProblem {
        problem: ConvexProblem::default(),
        vars,
        direction: cfg.direction,
        base_voltage: sm.base_voltage,
        load: sp.load.clone(),
        weights: weights.clone(),
        v_bounds,
        l_cap,
        size,
    };

    // net injections p_net = −load + p, q_net = −load_q + q
    let p_net = |node: usize, vars: &[Option<NodeVars>]| {
        let mut e = LinExpr::constant(-sp.load[node].re);
        if let Some(p) = vars[node].and_then(|v| v.p) {
            e = e.term(p, 1.0);
        }
        e
    };
    let q_net = |node: usize, vars: &[Option<NodeVars>]| {
        let mut e = LinExpr::constant(-sp.load[node].im);
        if let Some(q) = vars[node].and_then(|v| v.q) {
            e = e.term(q, 1.0);
        }
        e
    };

    for node in 0..n {
        let Some(v) = out.vars[node] else { continue };
        let id = sp.bus_ids[node];
        let (r, x) = (sp.r(node), sp.x(node));
        let z2 = r * r + x * x;
        let parent = topo.parent(node).unwrap();
        match cfg.form {
            ProxyForm::Recursive => {
                for (flow, loss, net, r_or_x, tag) in [
                    (v.p_plus, v.l_plus, p_net(node, &out.vars), r, "P+"),
                    (v.p_minus, v.l_minus, p_net(node, &out.vars), r, "P-"),
                    (v.q_plus, v.l_plus, q_net(node, &out.vars), x, "Q+"),
                    (v.q_minus, v.l_minus, q_net(node, &out.vars), x, "Q-"),
                ] {
                    // flow = −net + Σ child flows + r·l
                    let mut e = LinExpr::var(flow).plus(&net, 1.0).term(loss, -r_or_x);
                    for &c in topo.children(node) {
                        let cv = out.vars[c].unwrap();
                        let child_flow = match tag {
                            "P+" => cv.p_plus,
                            "P-" => cv.p_minus,
                            "Q+" => cv.q_plus,
                            _ => cv.q_minus,
                        };
                        e = e.term(child_flow, -1.0);
                    }
                    pb.add(format!("prop:{tag}[{id}]"), Constraint::Eq(e));
                }
                // V⁺ pairs with the lower flow and current proxies, V⁻ with the upper
                for (vv, upper, pf, qf, l, tag) in [
                    (v.v_plus, true, v.p_minus, v.q_minus, v.l_minus, "V+"),
                    (v.v_minus, false, v.p_plus, v.q_plus, v.l_plus, "V-"),
                ] {
                    let e = LinExpr::var(vv)
                        .plus(&out.v_expr(parent, upper), -1.0)
                        .term(pf, 2.0 * r)
                        .term(qf, 2.0 * x)
                        .term(l, -z2);
                    pb.add(format!("prop:{tag}[{id}]"), Constraint::Eq(e));
                }
            }
            ProxyForm::Matrix => {
                let k = sm.position[node].unwrap();
                let mut rows: [(usize, &str, LinExpr); 6] = [
                    (v.p_plus, "P+", LinExpr::default()),
                    (v.p_minus, "P-", LinExpr::default()),
                    (v.q_plus, "Q+", LinExpr::default()),
                    (v.q_minus, "Q-", LinExpr::default()),
                    (v.v_plus, "V+", LinExpr::constant(-sm.base_voltage)),
                    (v.v_minus, "V-", LinExpr::constant(-sm.base_voltage)),
                ];
                for (m, &other) in sm.nodes.iter().enumerate() {
                    let ov = out.vars[other].unwrap();
                    let (pn, qn) = (p_net(other, &out.vars), q_net(other, &out.vars));
                    let c = sm.c[(k, m)];
                    rows[0].2 = std::mem::take(&mut rows[0].2).plus(&pn, -c).term(ov.l_plus, -sm.dr[(k, m)]);
                    rows[1].2 = std::mem::take(&mut rows[1].2).plus(&pn, -c).term(ov.l_minus, -sm.dr[(k, m)]);
                    rows[2].2 = std::mem::take(&mut rows[2].2).plus(&qn, -c).term(ov.l_plus, -sm.dx[(k, m)]);
                    rows[3].2 = std::mem::take(&mut rows[3].2).plus(&qn, -c).term(ov.l_minus, -sm.dx[(k, m)]);
                    for (row, l) in [(4, ov.l_minus), (5, ov.l_plus)] {
                        rows[row].2 = std::mem::take(&mut rows[row].2)
                            .plus(&pn, -sm.mp[(k, m)])
                            .plus(&qn, -sm.mq[(k, m)])
                            .term(l, sm.h[(k, m)]);
                    }
                }
                for (var, tag, e) in rows {
                    pb.add(format!("prop:{tag}[{id}]"), Constraint::Eq(e.term(var, 1.0)));
                }
            }
        }
        out.size.propagation += 6;

        // Taylor bounds on the current of the branch feeding `node`
        let bt = &tp.branches[sm.position[node].unwrap()];
        let dev = |upper: bool| -> [LinExpr; 3] {
            let (pf, qf) = if upper { (v.p_plus, v.q_plus) } else { (v.p_minus, v.q_minus) };
            [
                LinExpr::var(pf).offset(-bt.p0),
                LinExpr::var(qf).offset(-bt.q0),
                out.v_expr(parent, upper).offset(-bt.v0),
            ]
        };
        let (d_up, d_lo) = (dev(true), dev(false));
        let (jp, jn) = (bt.jac_pos(), bt.jac_neg());

        let mut aff = LinExpr::var(v.l_minus).offset(-bt.l0);
        let mut u = LinExpr::default();
        for m in 0..3 {
            aff = aff.plus(&d_lo[m], -jp[m]).plus(&d_up[m], -jn[m]);
            u = u.plus(&d_up[m], jp[m]).plus(&d_lo[m], jn[m]);
        }
        pb.add(format!("aff[{id}]"), Constraint::Eq(aff));
        out.size.affine_current += 1;
        pb.add(format!("abs+[{id}]"), Constraint::Le(LinExpr::default().plus(&u, 2.0).term(v.t, -1.0)));
        pb.add(format!("abs-[{id}]"), Constraint::Le(LinExpr::default().plus(&u, -2.0).term(v.t, -1.0)));
        out.size.abs_terms += 2;

        // δᵀHδ ≤ t  ⇔  (δP − aδV)² + (δQ − bδV)² ≤ (V⁰/2)·t
        let (a, b) = bt.quad_coefficients();
        for mask in 0..8u8 {
            let pick = |i: usize| if mask & (1 << i) != 0 { &d_up[i] } else { &d_lo[i] };
            let w1 = pick(0).clone().plus(pick(2), -a);
            let w2 = pick(1).clone().plus(pick(2), -b);
            pb.add(
                format!("quad{mask}[{id}]"),
                Constraint::SumSquares {
                    squares: vec![w1, w2],
                    bound: LinExpr::default().term(v.t, bt.v0 / 2.0),
                },
            );
        }
        out.size.quadratic_terms += 8;
        pb.add(format!("lquad[{id}]"), Constraint::Le(LinExpr::var(v.t).offset(bt.l0).term(v.l_plus, -1.0)));
        out.size.quad_links += 1;

        if let Some(lo) = cfg.l_min {
            pb.add(format!("bound:l-[{id}]"), Constraint::Le(LinExpr::constant(lo).term(v.l_minus, -1.0)));
            out.size.bounds += 1;
        }
        if let Some(cap) = out.l_cap[node] {
            pb.add(format!("bound:l+[{id}]"), Constraint::Le(LinExpr::var(v.l_plus).offset(-cap)));
            out.size.bounds += 1;
        }
        if let Some((lo, hi)) = out.v_bounds[node] {
            pb.add(format!("bound:V-[{id}]"), Constraint::Le(LinExpr::constant(lo).term(v.v_minus, -1.0)));
            pb.add(format!("bound:V+[{id}]"), Constraint::Le(LinExpr::var(v.v_plus).offset(-hi)));
            out.size.bounds += 2;
        }
    }

    let caps = s_caps(sp, cfg);
    for node in 0..n {
        let Some(v) = out.vars[node] else { continue };
        if let (Some(p), true) = (v.p, cfg.sign_restricted) {
            let id = sp.bus_ids[node];
            pb.add(format!("sign[{id}]"), Constraint::Le(LinExpr::default().term(p, -cfg.direction.sign())));
            out.size.sign += 1;
        }
        let (Some(p), Some(cap)) = (v.p, caps[node]) else { continue };
        let id = sp.bus_ids[node];
        match v.q {
            None => {
                pb.add(format!("smax+[{id}]"), Constraint::Le(LinExpr::var(p).offset(-cap)));
                pb.add(format!("smax-[{id}]"), Constraint::Le(LinExpr::constant(-cap).term(p, -1.0)));
                out.size.capacity += 2;
            }
            Some(q) => {
                pb.add(
                    format!("smax[{id}]"),
                    Constraint::Soc {
                        head: LinExpr::constant(cap),
                        tail: vec![LinExpr::var(p), LinExpr::var(q)],
                    },
                );
                out.size.capacity += 1;
            }
        }
    }

    let sign = cfg.direction.sign();
    let mut obj = LinExpr::default();
    for node in 0..n {
        if let Some(p) = out.vars[node].and_then(|v| v.p) {
            obj = obj.term(p, -sign * weights[node]);
        }
    }
    pb.objective = obj;
    out.problem = pb;
    Ok(out)
}

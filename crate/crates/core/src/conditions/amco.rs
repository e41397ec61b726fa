use std::collections::{BTreeSet, HashSet};
use std::ops::ControlFlow;

use super::enumerate::{accordant_choices, all_states, for_each_state, product_size, within_budget};
use super::{
    domains, equal_on, is_accordant, BoxFamily, CheckOptions, CheckReport, Condition, ConditionError,
    DistanceFamily, EpochBoxes, Witness,
};
use crate::engine::FunctionFamily;
use crate::nodes::NodeSet;
use crate::schedule::EpochId;

/// Iterate `⊥, F(⊥), F²(⊥), ..` until `F^k(⊥) = F^{k+1}(⊥)`. Returns the
/// fixed point and `k`.
pub fn find_fixed_point<F: FunctionFamily>(
    f: &F,
    epoch: EpochId,
    participants: NodeSet,
    max_steps: usize,
) -> Result<(Vec<F::Value>, usize), ConditionError> {
    let mut x = f.bottom();
    for k in 0..=max_steps {
        let y = f.apply(epoch, participants, &x);
        if y == x {
            return Ok((x, k));
        }
        x = y;
    }
    Err(ConditionError::NoFixedPoint {
        epoch,
        participants,
        steps: max_steps,
    })
}

/// Every accordant fixed point of `F^{ep}`, by enumeration of `A_p`.
pub fn accordant_fixed_points<F: FunctionFamily>(
    f: &F,
    epoch: EpochId,
    participants: NodeSet,
    opts: &CheckOptions,
) -> Result<Vec<Vec<F::Value>>, ConditionError> {
    let doms = domains(f)?;
    let choices = accordant_choices(participants, &doms, &f.bottom());
    within_budget("accordant states", product_size(&choices), opts.budget)?;
    Ok(all_states(&choices)
        .into_iter()
        .filter(|x| f.apply(epoch, participants, x) == *x)
        .collect())
}

struct Ctx<'a, F: FunctionFamily> {
    f: &'a F,
    epoch: EpochId,
    p: NodeSet,
    sets: Vec<HashSet<F::Value>>,
}

impl<F: FunctionFamily> Ctx<'_, F> {
    fn apply(&self, x: &[F::Value]) -> Result<Vec<F::Value>, ConditionError> {
        let y = self.f.apply(self.epoch, self.p, x);
        if let Some(i) = (0..y.len()).find(|&i| !self.sets[i].contains(&y[i])) {
            return Err(ConditionError::DomainViolation {
                epoch: self.epoch,
                participants: self.p,
                node: i,
                value: format!("{:?}", y[i]),
            });
        }
        Ok(y)
    }

    fn witness(&self, condition: Condition, states: Vec<Vec<F::Value>>, detail: String) -> Witness<F::Value> {
        Witness {
            condition,
            epoch: self.epoch,
            participants: self.p,
            other: None,
            states,
            node: None,
            box_index: None,
            detail,
        }
    }
}

/// Check DU1–DU5 for every supplied `(epoch, participants)` pair.
pub fn check_dynamic_amco<F, D>(
    f: &F,
    dist: &D,
    epochs: &[(EpochId, NodeSet)],
    opts: &CheckOptions,
) -> Result<CheckReport<F::Value>, ConditionError>
where
    F: FunctionFamily,
    D: DistanceFamily<F::Value> + ?Sized,
{
    let doms = domains(f)?;
    let bottom = f.bottom();
    within_budget("the state space", product_size(&doms), opts.budget)?;
    let mut report = CheckReport::new(&Condition::AMCO);

    for &(epoch, p) in epochs {
        let ctx = Ctx {
            f,
            epoch,
            p,
            sets: doms.iter().map(|d| d.iter().cloned().collect()).collect(),
        };
        let lift = |i: usize, v: &F::Value| {
            let mut x = bottom.clone();
            x[i] = v.clone();
            x
        };

        // DU1 and DU2, component by component.
        for (i, dom) in doms.iter().enumerate() {
            let bound = dist.bound(epoch, p, i);
            for u in dom {
                for v in dom {
                    let d = dist.distance(epoch, p, i, u, v);
                    if !report.has_failed(Condition::DU1) && (d == 0) != (u == v) {
                        let mut w = ctx.witness(
                            Condition::DU1,
                            vec![lift(i, u), lift(i, v)],
                            format!("d_{i}({u:?}, {v:?}) = {d}"),
                        );
                        w.node = Some(i);
                        report.fail(w);
                    }
                    if !report.has_failed(Condition::DU2) && d > bound {
                        let mut w = ctx.witness(
                            Condition::DU2,
                            vec![lift(i, u), lift(i, v)],
                            format!("d_{i}({u:?}, {v:?}) = {d} exceeds the bound {bound}"),
                        );
                        w.node = Some(i);
                        report.fail(w);
                    }
                }
            }
        }

        let accordant = all_states(&accordant_choices(p, &doms, &bottom));
        let images: Vec<Vec<F::Value>> = accordant.iter().map(|x| ctx.apply(x)).collect::<Result<_, _>>()?;
        let big_d = |x: &[F::Value], y: &[F::Value]| dist.state_distance(epoch, p, x, y);

        if !report.has_failed(Condition::DU3) {
            for (x, fx) in accordant.iter().zip(&images) {
                if equal_on(p, x, fx) {
                    continue;
                }
                let ffx = ctx.apply(fx)?;
                let (before, after) = (big_d(x, fx), big_d(fx, &ffx));
                if before <= after {
                    report.fail(ctx.witness(
                        Condition::DU3,
                        vec![x.clone(), fx.clone(), ffx],
                        format!("D(x, F(x)) = {before} is not above D(F(x), F(F(x))) = {after}"),
                    ));
                    break;
                }
            }
        }

        if !report.has_failed(Condition::DU4) {
            let fixed: Vec<&Vec<F::Value>> = accordant
                .iter()
                .zip(&images)
                .filter(|(x, fx)| x == fx)
                .map(|(x, _)| x)
                .collect();
            'outer: for xs in fixed {
                for (x, fx) in accordant.iter().zip(&images) {
                    if equal_on(p, x, xs) {
                        continue;
                    }
                    let (before, after) = (big_d(xs, x), big_d(xs, fx));
                    if before <= after {
                        let also_fixed = x == fx;
                        report.fail(ctx.witness(
                            Condition::DU4,
                            vec![xs.clone(), x.clone(), fx.clone()],
                            format!(
                                "D(x*, x) = {before} is not above D(x*, F(x)) = {after}{}",
                                if also_fixed { "; x is a second fixed point" } else { "" }
                            ),
                        ));
                        break 'outer;
                    }
                }
            }
        }

        if !report.has_failed(Condition::DU5) {
            let mut err = None;
            let hit = for_each_state(&doms, |x| match ctx.apply(x) {
                Err(e) => {
                    err = Some(e);
                    ControlFlow::Break(None)
                }
                Ok(fx) if !is_accordant(p, &bottom, &fx) => ControlFlow::Break(Some((x.to_vec(), fx))),
                Ok(_) => ControlFlow::Continue(()),
            });
            if let Some(e) = err {
                return Err(e);
            }
            if let Some(Some((x, fx))) = hit {
                let node = (0..fx.len()).find(|&i| !p.contains(i) && fx[i] != bottom[i]);
                let mut w = ctx.witness(Condition::DU5, vec![x, fx], "F(x) is not accordant".into());
                w.node = node;
                report.fail(w);
            }
        }
    }
    Ok(report)
}

/// Build boxes for one `(epoch, participants)` from a distance family.
///
/// `B(0)_i = S_i`; for `k >= 1`, `B(k)_i = {⊥_i}` off the participants and
/// `{v : d_i(v, x*_i) <= d_max - (k - 1)}` on them, the subtraction
/// saturating at 0. `kstar = d_max + 1`, or 0 when `S` is already `{x*}`.
pub fn amco_to_aco<F, D>(
    f: &F,
    dist: &D,
    epoch: EpochId,
    participants: NodeSet,
    opts: &CheckOptions,
) -> Result<EpochBoxes<F::Value>, ConditionError>
where
    F: FunctionFamily,
    D: DistanceFamily<F::Value> + ?Sized,
{
    let doms = domains(f)?;
    let bottom = f.bottom();
    let (xstar, _) = find_fixed_point(f, epoch, participants, opts.max_steps)?;
    let d_max = participants
        .iter()
        .map(|i| dist.bound(epoch, participants, i))
        .max()
        .unwrap_or(0);

    let level0: Vec<BTreeSet<F::Value>> = doms.iter().map(|d| d.iter().cloned().collect()).collect();
    if doms.iter().all(|d| d.len() == 1) {
        return EpochBoxes::new(0, xstar, vec![level0.clone(), level0]);
    }
    let kstar = d_max as usize + 1;
    let mut levels = vec![level0];
    for k in 1..=kstar + 1 {
        let threshold = d_max.saturating_sub((k - 1) as u32);
        let level = doms
            .iter()
            .enumerate()
            .map(|(i, dom)| {
                if participants.contains(i) {
                    dom.iter()
                        .filter(|v| dist.distance(epoch, participants, i, v, &xstar[i]) <= threshold)
                        .cloned()
                        .collect()
                } else {
                    BTreeSet::from([bottom[i].clone()])
                }
            })
            .collect();
        levels.push(level);
    }
    EpochBoxes::new(kstar, xstar, levels)
}

/// [`amco_to_aco`] for each pair, collected into one family.
pub fn reduce_all<F, D>(
    f: &F,
    dist: &D,
    epochs: &[(EpochId, NodeSet)],
    opts: &CheckOptions,
) -> Result<BoxFamily<F::Value>, ConditionError>
where
    F: FunctionFamily,
    D: DistanceFamily<F::Value> + ?Sized,
{
    let mut out = BoxFamily::new();
    for &(e, p) in epochs {
        out.insert(e, p, amco_to_aco(f, dist, e, p, opts)?);
    }
    Ok(out)
}

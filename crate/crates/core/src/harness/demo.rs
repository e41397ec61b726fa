//! A node leaves while its last messages are still in flight.
//!
//! Triangle `0 - 1` (cost 1), `1 - 2` (cost 1), `0 - 2` (cost 3), destination
//! 0, synchronous for 8 ticks. Node 1 leaves at tick 4. At tick 4 everyone
//! still reads tick-3 data, and at tick 5 node 2 reads node 1's tick-2 state.

use serde::{Deserialize, Serialize};

use crate::boxtrace::messages_well_formed;
use crate::engine::{run_delta, Case, FunctionFamily, Trace, Value};
use crate::families::{build_min_routing, PathCost, RoutingEpoch, RoutingInstance};
use crate::nodes::{NodeId, NodeSet};
use crate::pseudocycle::{earliest_expiry_end, ExpiryScope};
use crate::schedule::{DynamicSchedule, EpochId, Time};

/// An activated node read a real (non-`⊥`) value from a node outside `ρ(t)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaleRead<V> {
    pub t: Time,
    pub i: NodeId,
    pub j: NodeId,
    pub send_time: Time,
    pub value: V,
}

/// Every stale read in a trace.
pub fn stale_reads<V: Value>(trace: &Trace<V>) -> Vec<StaleRead<V>> {
    let s = &trace.schedule;
    let mut out = Vec::new();
    for t in 1..=s.horizon {
        let rho = s.participants(t);
        for i in (0..s.n).filter(|&i| trace.case(t, i) == Case::Activated) {
            for j in (0..s.n).filter(|&j| !rho.contains(j)) {
                let send_time = s.beta(t, i, j);
                let value = trace.value(send_time, j);
                if value != &trace.bottom[j] {
                    out.push(StaleRead {
                        t,
                        i,
                        j,
                        send_time,
                        value: value.clone(),
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaleReport {
    pub leaver: NodeId,
    pub reader: NodeId,
    pub switch: Time,
    pub stale_reads: Vec<StaleRead<PathCost>>,
    /// Ticks of the second epoch at which the reader's messages are not well
    /// formed.
    pub not_well_formed: Vec<Time>,
    /// End of the reader's earliest expiry period starting at the switch.
    pub expiry_end: Option<Time>,
    pub well_formed_after_expiry: bool,
    /// Stale reads in the same run without the departure.
    pub control_stale_reads: usize,
}

#[derive(Clone, Debug)]
pub struct StaleDemo {
    pub trace: Trace<PathCost>,
    pub control: Trace<PathCost>,
    pub report: StaleReport,
}

/// Build and evaluate the scenario.
pub fn stale_message_demo() -> StaleDemo {
    const LEAVER: NodeId = 1;
    const READER: NodeId = 2;
    const SWITCH: Time = 4;
    let instance = RoutingInstance {
        epochs: vec![RoutingEpoch {
            weights: RoutingInstance::weights_from_links(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 3)]),
            participants: NodeSet::full(3),
        }],
        destination: 0,
        cap: 4,
    };
    let (f, _) = build_min_routing(instance).expect("the demo instance is valid");
    let control_schedule = DynamicSchedule::synchronous(3, 8);
    let mut s = control_schedule.clone();
    let mut remaining = NodeSet::full(3);
    remaining.remove(LEAVER);
    s.pi.insert(EpochId(1), remaining);
    for t in SWITCH..=s.horizon {
        s.eta[t] = EpochId(1);
    }
    s.beta[SWITCH][READER][LEAVER] = 2;

    let x = f.bottom();
    let trace = run_delta(&f, &s, &x).expect("the demo schedule is valid");
    let control = run_delta(&f, &control_schedule, &x).expect("the control schedule is valid");
    let expiry_end = earliest_expiry_end(&s, READER, SWITCH, ExpiryScope::Epoch);
    let report = StaleReport {
        leaver: LEAVER,
        reader: READER,
        switch: SWITCH,
        stale_reads: stale_reads(&trace),
        not_well_formed: (SWITCH..=s.horizon)
            .filter(|&t| !messages_well_formed(&trace, READER, t))
            .collect(),
        expiry_end,
        well_formed_after_expiry: expiry_end.is_some_and(|m| messages_well_formed(&trace, READER, m)),
        control_stale_reads: stale_reads(&control).len(),
    };
    StaleDemo { trace, control, report }
}

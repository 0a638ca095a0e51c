use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CostModel;
use crate::scene::AttributeLayout;
use crate::transfer::{volume, BatchPlan};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    Compute,
    Comm,
    HostAdam,
}

impl Resource {
    pub const ALL: [Resource; 3] = [Resource::Compute, Resource::Comm, Resource::HostAdam];

    pub fn name(self) -> &'static str {
        match self {
            Resource::Compute => "compute",
            Resource::Comm => "comm",
            Resource::HostAdam => "host_adam",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EventKind {
    Sched,
    Ld,
    Fwd,
    Bwd,
    St,
    Adam,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Sched => "SCHED",
            EventKind::Ld => "LD",
            EventKind::Fwd => "FWD",
            EventKind::Bwd => "BWD",
            EventKind::St => "ST",
            EventKind::Adam => "ADAM",
        }
    }

    pub fn resource(self) -> Resource {
        match self {
            EventKind::Sched | EventKind::Fwd | EventKind::Bwd => Resource::Compute,
            EventKind::Ld | EventKind::St => Resource::Comm,
            EventKind::Adam => Resource::HostAdam,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Cached, pipelined offloading with early optimizer chunks.
    Clm,
    /// Every microbatch loads and stores all Gaussians, fully serialized.
    Naive,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Clm => "clm",
            Mode::Naive => "naive",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clm" => Ok(Mode::Clm),
            "naive" => Ok(Mode::Naive),
            _ => Err(Error::config(format!("unknown mode {s:?}; expected clm or naive"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub resource: Resource,
    pub kind: EventKind,
    /// 1-based; 0 for the batch-level scheduling event.
    pub microbatch: usize,
    pub start: f64,
    pub end: f64,
}

impl SimEvent {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub mode: Mode,
    pub batch_size: usize,
    pub events: Vec<SimEvent>,
}

impl SimTrace {
    pub fn makespan(&self) -> f64 {
        self.events.iter().map(|e| e.end).fold(0.0, f64::max)
    }

    pub fn on(&self, r: Resource) -> impl Iterator<Item = &SimEvent> {
        self.events.iter().filter(move |e| e.resource == r)
    }

    pub fn busy_time(&self, r: Resource) -> f64 {
        self.on(r).map(SimEvent::duration).sum()
    }

    pub fn find(&self, kind: EventKind, microbatch: usize) -> Option<&SimEvent> {
        self.events.iter().find(|e| e.kind == kind && e.microbatch == microbatch)
    }

    /// Tab-separated `resource kind microbatch start end`, one event per row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("resource\tkind\tmicrobatch\tstart\tend\n");
        for e in &self.events {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.9e}\t{:.9e}\n",
                e.resource.name(),
                e.kind.name(),
                e.microbatch,
                e.start,
                e.end
            ));
        }
        out
    }

    /// Checks per-resource exclusivity and ordering.
    pub fn check_well_formed(&self) -> Result<()> {
        for r in Resource::ALL {
            let mut evs: Vec<_> = self.on(r).collect();
            evs.sort_by(|a, b| a.start.total_cmp(&b.start));
            for e in &evs {
                if !(e.end >= e.start) {
                    return Err(Error::inconsistent(format!("{:?} {} ends before it starts", e.kind, e.microbatch)));
                }
            }
            for w in evs.windows(2) {
                if w[1].start < w[0].end {
                    return Err(Error::inconsistent(format!("{} events overlap", r.name())));
                }
            }
        }
        Ok(())
    }
}

struct Task {
    kind: EventKind,
    microbatch: usize,
    duration: f64,
    deps: Vec<usize>,
}

/// Builds the task graph for `mode` and list-schedules it with each resource
/// executing its queue in a fixed order.
pub fn simulate(plan: &BatchPlan, layout: &AttributeLayout, cm: &CostModel, mode: Mode) -> Result<SimTrace> {
    cm.validate()?;
    if plan.pixels.len() != plan.steps.len() {
        return Err(Error::inconsistent("pixel counts do not match microbatch count"));
    }
    let b = plan.batch_size();
    let vol = volume(&plan.steps, layout);
    let fwd: Vec<f64> =
        plan.steps.iter().zip(&plan.pixels).map(|(s, &p)| cm.fwd.eval(s.working_set_len() as u64, p)).collect();
    let bwd: Vec<f64> =
        plan.steps.iter().zip(&plan.pixels).map(|(s, &p)| cm.bwd.eval(s.working_set_len() as u64, p)).collect();

    let mut tasks: Vec<Task> = Vec::new();
    let mut queues: [Vec<usize>; 3] = Default::default();
    let add = |tasks: &mut Vec<Task>, kind: EventKind, mb: usize, duration: f64, deps: Vec<usize>| {
        tasks.push(Task { kind, microbatch: mb, duration, deps });
        tasks.len() - 1
    };
    let sched = add(&mut tasks, EventKind::Sched, 0, cm.sched_overhead, vec![]);

    match mode {
        Mode::Clm => {
            let ld: Vec<usize> = (0..b)
                .map(|i| {
                    let deps = if i == 0 { vec![sched] } else { vec![] };
                    add(&mut tasks, EventKind::Ld, i + 1, cm.h2d_time(vol.steps[i].host_to_device_bytes), deps)
                })
                .collect();
            let mut f = vec![0; b];
            let mut bw = vec![0; b];
            let mut st = vec![0; b];
            for i in 0..b {
                f[i] = add(&mut tasks, EventKind::Fwd, i + 1, fwd[i], vec![ld[i]]);
                // carried gradients reach the next microbatch's buffer only
                // once the previous store has drained it
                let deps = if i == 0 { vec![f[i]] } else { vec![f[i], st[i - 1]] };
                bw[i] = add(&mut tasks, EventKind::Bwd, i + 1, bwd[i], deps);
                st[i] = add(&mut tasks, EventKind::St, i + 1, cm.d2h_time(vol.steps[i].device_to_host_bytes), vec![bw[i]]);
            }
            let adam: Vec<usize> = (0..b)
                .map(|i| add(&mut tasks, EventKind::Adam, i + 1, cm.adam_time(plan.steps[i].adam_set.len() as u64), vec![st[i]]))
                .collect();
            queues[0].push(sched);
            for i in 0..b {
                queues[0].extend([f[i], bw[i]]);
            }
            // LD1, LD2, ST1, LD3, ST2, ..., ST_B
            if b > 0 {
                queues[1].push(ld[0]);
            }
            for i in 0..b {
                if i + 1 < b {
                    queues[1].push(ld[i + 1]);
                }
                queues[1].push(st[i]);
            }
            queues[2] = adam;
        }
        Mode::Naive => {
            let full = plan.n_total;
            let mut prev = sched;
            for i in 0..b {
                let ld = add(&mut tasks, EventKind::Ld, i + 1, cm.h2d_time(full * layout.offload_record_bytes), vec![prev]);
                let f = add(&mut tasks, EventKind::Fwd, i + 1, fwd[i], vec![ld]);
                let bw = add(&mut tasks, EventKind::Bwd, i + 1, bwd[i], vec![f]);
                let st = add(&mut tasks, EventKind::St, i + 1, cm.d2h_time(full * layout.grad_record_bytes), vec![bw]);
                queues[0].extend([f, bw]);
                queues[1].extend([ld, st]);
                prev = st;
            }
            queues[0].insert(0, sched);
            if b > 0 {
                let adam = add(&mut tasks, EventKind::Adam, b, cm.adam_time(plan.touched_count()), vec![prev]);
                queues[2].push(adam);
            }
        }
    }
    run(&tasks, &queues, mode, b)
}

fn run(tasks: &[Task], queues: &[Vec<usize>; 3], mode: Mode, batch_size: usize) -> Result<SimTrace> {
    let mut end: Vec<Option<f64>> = vec![None; tasks.len()];
    let mut head = [0usize; 3];
    let mut free = [0.0f64; 3];
    let mut events = Vec::with_capacity(tasks.len());
    loop {
        let mut progressed = false;
        for r in 0..3 {
            while let Some(&t) = queues[r].get(head[r]) {
                let ready: Option<f64> =
                    tasks[t].deps.iter().try_fold(free[r], |acc, &d| end[d].map(|e| acc.max(e)));
                let Some(start) = ready else { break };
                let finish = start + tasks[t].duration;
                end[t] = Some(finish);
                free[r] = finish;
                head[r] += 1;
                progressed = true;
                events.push(SimEvent {
                    resource: Resource::ALL[r],
                    kind: tasks[t].kind,
                    microbatch: tasks[t].microbatch,
                    start,
                    end: finish,
                });
            }
        }
        if (0..3).all(|r| head[r] == queues[r].len()) {
            break;
        }
        if !progressed {
            return Err(Error::inconsistent("task graph deadlocked"));
        }
    }
    events.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.resource.cmp(&b.resource)));
    Ok(SimTrace { mode, batch_size, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::culling::SparsitySet;
    use crate::sim::{AdamCost, RenderCost};

    fn plan(raw: &[&[u32]], n: u64, pixels: u64) -> BatchPlan {
        let sets: Vec<_> =
            raw.iter().enumerate().map(|(i, x)| SparsitySet::new(i as u64, x.to_vec(), n).unwrap()).collect();
        let views: Vec<_> = (0..raw.len())
            .map(|i| {
                crate::scene::CameraView::look_at(
                    i as u64,
                    nalgebra::Vector3::new(0.0, -3.0, 0.0),
                    nalgebra::Vector3::zeros(),
                    nalgebra::Vector3::z(),
                    10.0,
                    pixels as u32,
                    1,
                    0.1,
                    10.0,
                )
            })
            .collect();
        BatchPlan::new(&sets, &views, n).unwrap()
    }

    fn cm() -> CostModel {
        CostModel {
            h2d_bandwidth: 256.0,
            d2h_bandwidth: 256.0,
            transfer_latency: 0.0,
            fwd: RenderCost { per_gaussian: 1.0, per_pixel: 0.0, constant: 0.0 },
            bwd: RenderCost { per_gaussian: 2.0, per_pixel: 0.0, constant: 0.0 },
            adam: AdamCost { per_param: 0.0, constant: 0.5 },
            sched_overhead: 0.25,
        }
    }

    #[test]
    fn zero_comm_is_pure_compute() {
        let p = plan(&[&[0, 1], &[1, 2, 3], &[4]], 6, 10);
        let mut c = cm();
        c.h2d_bandwidth = f64::INFINITY;
        c.d2h_bandwidth = f64::INFINITY;
        c.adam = AdamCost::default();
        let t = simulate(&p, &AttributeLayout::default(), &c, Mode::Clm).unwrap();
        assert_eq!(t.makespan(), 0.25 + 3.0 * (2.0 + 3.0 + 1.0));
        t.check_well_formed().unwrap();
    }

    #[test]
    fn single_microbatch_is_serial() {
        let p = plan(&[&[0, 1, 2]], 4, 10);
        let t = simulate(&p, &AttributeLayout::default(), &cm(), Mode::Clm).unwrap();
        // LD 3 + FWD 3 + BWD 6 + ST 3 + ADAM 0.5
        assert_eq!(t.makespan(), 0.25 + 3.0 + 3.0 + 6.0 + 3.0 + 0.5);
        let kinds: Vec<_> = t.events.iter().map(|e| e.kind).collect();
        use EventKind::*;
        assert_eq!(kinds, vec![Sched, Ld, Fwd, Bwd, St, Adam]);
    }

    #[test]
    fn hidden_communication() {
        // LD2 = 1 < BWD1 = 8, ST1 = 1 < FWD2 = 4
        let p = plan(&[&[0, 1, 2, 3], &[0, 1, 2, 4]], 5, 10);
        let t = simulate(&p, &AttributeLayout::default(), &cm(), Mode::Clm).unwrap();
        let adam_trailing = 0.5;
        assert_eq!(t.makespan(), 0.25 + 4.0 + (4.0 + 8.0) * 2.0 + 4.0 + adam_trailing);
        t.check_well_formed().unwrap();
        let ld2 = t.find(EventKind::Ld, 2).unwrap();
        assert!(ld2.start < t.find(EventKind::Fwd, 1).unwrap().end);
    }

    #[test]
    fn naive_serializes_full_transfers() {
        let p = plan(&[&[0], &[1]], 4, 10);
        let t = simulate(&p, &AttributeLayout::default(), &cm(), Mode::Naive).unwrap();
        // per step: LD 4 + FWD 1 + BWD 2 + ST 4, then one ADAM
        assert_eq!(t.makespan(), 0.25 + 2.0 * 11.0 + 0.5);
        assert_eq!(t.events.iter().filter(|e| e.kind == EventKind::Adam).count(), 1);
        let c = simulate(&p, &AttributeLayout::default(), &cm(), Mode::Clm).unwrap();
        assert!(c.makespan() <= t.makespan());
        assert_eq!(c.on(Resource::Compute).map(SimEvent::duration).sum::<f64>(), t.busy_time(Resource::Compute));
    }

    #[test]
    fn deterministic_and_exports() {
        let p = plan(&[&[0, 1], &[1, 2], &[2, 3]], 4, 10);
        let a = simulate(&p, &AttributeLayout::default(), &cm(), Mode::Clm).unwrap();
        let b = simulate(&p, &AttributeLayout::default(), &cm(), Mode::Clm).unwrap();
        assert_eq!(a, b);
        let tsv = a.to_tsv();
        assert_eq!(tsv.lines().count(), 1 + a.events.len());
        assert!(tsv.lines().nth(1).unwrap().starts_with("compute\tSCHED\t0\t"));
        assert!("bogus".parse::<Mode>().is_err());
        let mut bad = cm();
        bad.h2d_bandwidth = -1.0;
        assert!(simulate(&p, &AttributeLayout::default(), &bad, Mode::Clm).is_err());
    }
}

//! Downlink frame layouts for short messages to several devices.
//!
//! Messages are partitioned into encoded blocks. With one block per message
//! the frame carries a header of pointers and each device decodes the header
//! plus its own block. With a single block holding every message there is no
//! header and every device decodes the whole frame. Intermediate groupings
//! trade frame length against per-device receive energy, counted in channel
//! uses the device must receive and decode.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbl::{check_epsilon, min_blocklength, LinkSnr};

const POINTER_FIXED_POINT_ROUNDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MessageSpec {
    pub device_id: u32,
    pub b_bits: u64,
    pub epsilon_target: f64,
}

impl MessageSpec {
    pub fn new(device_id: u32, b_bits: u64, epsilon_target: f64) -> Result<Self> {
        if b_bits == 0 {
            return Err(Error::Usage(format!("device {device_id}: message must carry >= 1 bit")));
        }
        check_epsilon(epsilon_target)?;
        Ok(MessageSpec { device_id, b_bits, epsilon_target })
    }
}

/// How the header that points at blocks is protected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HeaderPolicy {
    /// No header at all; useful to compare raw block sizes.
    Disabled,
    /// Header gets half of the tightest device budget; blocks get the rest.
    UnionSplit,
    /// Header encoded at a fixed error probability.
    Fixed(f64),
}

/// A grouping of message indices into blocks.
pub type Grouping = Vec<Vec<usize>>;

#[derive(Debug, Clone, PartialEq)]
pub struct FramePlan {
    pub grouping: Grouping,
    pub header_cu: u64,
    pub header_epsilon: Option<f64>,
    pub block_cu: Vec<u64>,
    pub block_epsilon: Vec<f64>,
    pub total_cu: u64,
    /// Indexed like the input message slice.
    pub per_device_energy_cu: Vec<u64>,
}

impl FramePlan {
    pub fn max_device_energy(&self) -> u64 {
        self.per_device_energy_cu.iter().copied().max().unwrap_or(0)
    }

    pub fn min_device_energy(&self) -> u64 {
        self.per_device_energy_cu.iter().copied().min().unwrap_or(0)
    }

    /// Index of the block holding message `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.grouping.iter().position(|g| g.contains(&i)).expect("message not in plan")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FrameDesigner {
    pub snr: LinkSnr,
    pub header: HeaderPolicy,
}

fn pointer_bits(total_cu: u64) -> u64 {
    if total_cu <= 1 {
        1
    } else {
        u64::from(64 - (total_cu - 1).leading_zeros())
    }
}

fn check_grouping(n: usize, grouping: &Grouping) -> Result<()> {
    let mut seen = vec![false; n];
    for g in grouping {
        if g.is_empty() {
            return Err(Error::Usage("grouping contains an empty block".into()));
        }
        for &i in g {
            if i >= n || seen[i] {
                return Err(Error::Usage(format!("grouping is not a partition (index {i})")));
            }
            seen[i] = true;
        }
    }
    if seen.iter().all(|&s| s) {
        Ok(())
    } else {
        Err(Error::Usage("grouping does not cover every message".into()))
    }
}

impl FrameDesigner {
    pub fn new(snr: LinkSnr, header: HeaderPolicy) -> Self {
        FrameDesigner { snr, header }
    }

    /// One block per message behind a pointer header.
    pub fn plan_separate(&self, messages: &[MessageSpec]) -> Result<FramePlan> {
        let grouping = (0..messages.len()).map(|i| vec![i]).collect();
        self.plan_with_header(messages, grouping)
    }

    /// Every message in one block at the tightest target, no header.
    pub fn plan_joint(&self, messages: &[MessageSpec]) -> Result<FramePlan> {
        if messages.is_empty() {
            return Err(Error::Usage("no messages to plan".into()));
        }
        let bits: u64 = messages.iter().map(|m| m.b_bits).sum();
        let eps = messages.iter().map(|m| m.epsilon_target).fold(1.0, f64::min);
        let block = min_blocklength(bits, eps, self.snr)?;
        Ok(FramePlan {
            grouping: vec![(0..messages.len()).collect()],
            header_cu: 0,
            header_epsilon: None,
            block_cu: vec![block],
            block_epsilon: vec![eps],
            total_cu: block,
            per_device_energy_cu: vec![block; messages.len()],
        })
    }

    /// Arbitrary grouping. A single group is planned as the joint frame;
    /// two or more groups get a pointer header like the separate frame.
    pub fn plan_grouped(&self, messages: &[MessageSpec], grouping: &Grouping) -> Result<FramePlan> {
        if messages.is_empty() {
            return Err(Error::Usage("no messages to plan".into()));
        }
        check_grouping(messages.len(), grouping)?;
        if grouping.len() == 1 {
            let mut plan = self.plan_joint(messages)?;
            plan.grouping = grouping.clone();
            return Ok(plan);
        }
        self.plan_with_header(messages, grouping.clone())
    }

    fn plan_with_header(&self, messages: &[MessageSpec], grouping: Grouping) -> Result<FramePlan> {
        if messages.is_empty() {
            return Err(Error::Usage("no messages to plan".into()));
        }
        check_grouping(messages.len(), &grouping)?;
        let tightest = messages.iter().map(|m| m.epsilon_target).fold(1.0, f64::min);
        let header_eps = match self.header {
            HeaderPolicy::Disabled => None,
            HeaderPolicy::UnionSplit => Some(tightest / 2.0),
            HeaderPolicy::Fixed(e) => {
                check_epsilon(e)?;
                if e >= tightest {
                    return Err(Error::Planning(format!(
                        "header error probability {e} leaves no budget for target {tightest}"
                    )));
                }
                Some(e)
            }
        };

        let mut block_cu = Vec::with_capacity(grouping.len());
        let mut block_epsilon = Vec::with_capacity(grouping.len());
        for g in &grouping {
            let bits: u64 = g.iter().map(|&i| messages[i].b_bits).sum();
            let target = g.iter().map(|&i| messages[i].epsilon_target).fold(1.0, f64::min);
            let eps = target - header_eps.unwrap_or(0.0);
            if eps <= 0.0 {
                return Err(Error::Planning(format!("no error budget left for block {g:?}")));
            }
            block_cu.push(min_blocklength(bits, eps, self.snr)?);
            block_epsilon.push(eps);
        }
        let payload_cu: u64 = block_cu.iter().sum();

        let header_cu = match header_eps {
            None => 0,
            Some(eh) => {
                // pointer width depends on the frame length, which depends on the header
                let mut total = payload_cu;
                let mut converged = None;
                for _ in 0..POINTER_FIXED_POINT_ROUNDS {
                    let width = pointer_bits(total);
                    let hdr = min_blocklength(width * grouping.len() as u64, eh, self.snr)?;
                    let next = payload_cu + hdr;
                    if pointer_bits(next) == width {
                        converged = Some(hdr);
                        break;
                    }
                    total = next;
                }
                converged.ok_or_else(|| Error::Planning("pointer width did not converge".into()))?
            }
        };

        let mut energy = vec![0; messages.len()];
        for (g, &cu) in grouping.iter().zip(&block_cu) {
            for &i in g {
                energy[i] = header_cu + cu;
            }
        }
        Ok(FramePlan {
            grouping,
            header_cu,
            header_epsilon: header_eps,
            block_cu,
            block_epsilon,
            total_cu: header_cu + payload_cu,
            per_device_energy_cu: energy,
        })
    }

    /// One point per grouping, sorted by frame length (ties by id).
    pub fn tradeoff_curve(
        &self,
        messages: &[MessageSpec],
        partitions: &[Grouping],
    ) -> Result<Vec<TradeoffPoint>> {
        let mut points = partitions
            .iter()
            .map(|g| {
                let plan = if g.len() == messages.len() && g.iter().all(|b| b.len() == 1) {
                    self.plan_separate(messages)?
                } else {
                    self.plan_grouped(messages, g)?
                };
                Ok(TradeoffPoint {
                    grouping_id: grouping_id(messages, g),
                    total_cu: plan.total_cu,
                    max_device_energy_cu: plan.max_device_energy(),
                    min_device_energy_cu: plan.min_device_energy(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        points.sort_by(|a, b| a.total_cu.cmp(&b.total_cu).then_with(|| a.grouping_id.cmp(&b.grouping_id)));
        Ok(points)
    }
}

/// `"1+2|3"`: device ids joined by `+` within a block, blocks by `|`.
pub fn grouping_id(messages: &[MessageSpec], grouping: &Grouping) -> String {
    grouping
        .iter()
        .map(|g| g.iter().map(|&i| messages[i].device_id.to_string()).collect::<Vec<_>>().join("+"))
        .collect::<Vec<_>>()
        .join("|")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub grouping_id: String,
    pub total_cu: u64,
    pub max_device_energy_cu: u64,
    pub min_device_energy_cu: u64,
}

/// Points not dominated in (frame length, worst-case device energy).
pub fn pareto_front(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    points
        .iter()
        .filter(|p| {
            !points.iter().any(|q| {
                q.total_cu <= p.total_cu
                    && q.max_device_energy_cu <= p.max_device_energy_cu
                    && (q.total_cu < p.total_cu || q.max_device_energy_cu < p.max_device_energy_cu)
            })
        })
        .cloned()
        .collect()
}

/// All set partitions of `0..n` (Bell number many) in restricted-growth order.
pub fn set_partitions(n: usize) -> Vec<Grouping> {
    fn rec(i: usize, n: usize, labels: &mut Vec<usize>, max: usize, out: &mut Vec<Grouping>) {
        if i == n {
            let mut g: Grouping = vec![Vec::new(); max];
            for (idx, &l) in labels.iter().enumerate() {
                g[l].push(idx);
            }
            out.push(g);
            return;
        }
        for l in 0..=max {
            labels.push(l);
            rec(i + 1, n, labels, max.max(l + 1), out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(0, n, &mut Vec::with_capacity(n), 0, &mut out);
    }
    out
}

/// Consecutive blocks of `size` messages (last block may be shorter).
pub fn contiguous_grouping(n: usize, size: usize) -> Grouping {
    (0..n).collect::<Vec<_>>().chunks(size.max(1)).map(|c| c.to_vec()).collect()
}

pub fn write_tradeoff_csv<W: Write>(out: W, points: &[TradeoffPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{WeatherError, WeatherVariable};
use crate::seeds::rng_for;

/// Which pick-freeze block a plan row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "block", content = "group", rename_all = "snake_case")]
pub enum Block {
    /// Every group from set A.
    A,
    /// Group `i` from set A, all other groups from set B.
    C(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRow {
    /// Position in the plan, also the weather sample id.
    pub index: usize,
    #[serde(flatten)]
    pub block: Block,
    /// Base sample `r` shared by A[r] and every C_i[r].
    pub base_row: usize,
    pub group_seeds: [u64; 6],
}

/// Pick-freeze arrangement of `n·7` weather samples.
///
/// Rows `0..n` are block A; rows `n·(i+1)..n·(i+2)` are block C_i for group
/// `i` in [`WeatherVariable::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub n: usize,
    pub master_seed: u64,
    pub groups: Vec<WeatherVariable>,
    pub seeds_a: Vec<u64>,
    pub seeds_b: Vec<u64>,
    pub rows: Vec<PlanRow>,
}

impl SamplePlan {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Row index of block `block` at base sample `r`.
    pub fn row_index(&self, block: Block, r: usize) -> usize {
        match block {
            Block::A => r,
            Block::C(i) => self.n * (i + 1) + r,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, WeatherError> {
        serde_json::from_str(s).map_err(|e| WeatherError::Format(format!("sample plan: {e}")))
    }
}

pub fn build_sample_plan(n: usize, master_seed: u64) -> Result<SamplePlan, WeatherError> {
    if n < 2 {
        return Err(WeatherError::Argument(format!("sample plan needs n >= 2, got {n}")));
    }
    let mut rng = rng_for("sample-plan", &[master_seed]);
    let seeds_a: Vec<u64> = (0..n).map(|_| rng.random()).collect();
    let seeds_b: Vec<u64> = (0..n).map(|_| rng.random()).collect();
    let groups = WeatherVariable::ALL.to_vec();

    let mut rows = Vec::with_capacity(n * (groups.len() + 1));
    for r in 0..n {
        rows.push(PlanRow {
            index: r,
            block: Block::A,
            base_row: r,
            group_seeds: [seeds_a[r]; 6],
        });
    }
    for i in 0..groups.len() {
        for r in 0..n {
            let mut group_seeds = [seeds_b[r]; 6];
            group_seeds[i] = seeds_a[r];
            rows.push(PlanRow {
                index: rows.len(),
                block: Block::C(i),
                base_row: r,
                group_seeds,
            });
        }
    }
    Ok(SamplePlan {
        n,
        master_seed,
        groups,
        seeds_a,
        seeds_b,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sample_plan_layout() {
        let plan = build_sample_plan(2, 9).unwrap();
        assert_eq!(plan.rows.len(), 14);
        let a1 = &plan.rows[plan.row_index(Block::A, 1)];
        let c3 = &plan.rows[plan.row_index(Block::C(2), 1)];
        assert_eq!(c3.block, Block::C(2));
        for g in 0..6 {
            assert_eq!(c3.group_seeds[g] == a1.group_seeds[g], g == 2, "group {g}");
        }
    }

    #[test]
    fn thousand_samples_give_seven_thousand_rows() {
        assert_eq!(build_sample_plan(1000, 1).unwrap().rows.len(), 7000);
    }

    #[test]
    fn plan_is_deterministic_and_validates_n() {
        assert_eq!(build_sample_plan(5, 3).unwrap(), build_sample_plan(5, 3).unwrap());
        assert_ne!(build_sample_plan(5, 3).unwrap(), build_sample_plan(5, 4).unwrap());
        assert!(build_sample_plan(1, 3).is_err());
    }

    #[test]
    fn json_round_trip() {
        let plan = build_sample_plan(3, 7).unwrap();
        assert_eq!(SamplePlan::from_json(&plan.to_json()).unwrap(), plan);
    }
}

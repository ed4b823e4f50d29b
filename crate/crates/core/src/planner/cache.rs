use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::{plan_auto, plan_cache_key, ContractionPlan, NetworkShape, PlanKey};

/// Shared plan store keyed by [`PlanKey`]. Lookups take a read lock; a miss
/// plans outside the lock and inserts under a short write lock.
#[derive(Debug, Default)]
pub struct PlanCache {
    cap: usize,
    plans: RwLock<HashMap<PlanKey, Arc<ContractionPlan>>>,
}

impl PlanCache {
    pub fn new(optimal_cap: usize) -> Self {
        Self {
            cap: optimal_cap,
            plans: RwLock::new(HashMap::new()),
        }
    }

    pub fn get_or_plan(&self, net: &NetworkShape) -> Arc<ContractionPlan> {
        let key = plan_cache_key(net);
        if let Some(plan) = self.plans.read().expect("plan cache poisoned").get(&key) {
            return Arc::clone(plan);
        }
        let plan = Arc::new(plan_auto(net, self.cap));
        let mut plans = self.plans.write().expect("plan cache poisoned");
        Arc::clone(plans.entry(key).or_insert(plan))
    }

    pub fn len(&self) -> usize {
        self.plans.read().expect("plan cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

use core::fmt;

/// Problem families the evaluators understand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ProblemKind {
    /// Step-by-step TSP construction.
    Tsp,
    /// Step-by-step 0-1 knapsack construction.
    Kp,
    /// Online bin packing.
    Bpp,
    /// Heuristic-matrix design for Ant System on TSP.
    AcoTsp,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::Tsp => "tsp",
            ProblemKind::Kp => "kp",
            ProblemKind::Bpp => "bpp",
            ProblemKind::AcoTsp => "aco_tsp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tsp" => Some(Self::Tsp),
            "kp" => Some(Self::Kp),
            "bpp" => Some(Self::Bpp),
            "aco_tsp" => Some(Self::AcoTsp),
            _ => None,
        }
    }

    pub fn schema(&self) -> &'static FeatureSchema {
        match self {
            ProblemKind::Tsp => &TSP_SCHEMA,
            ProblemKind::Kp => &KP_SCHEMA,
            ProblemKind::Bpp => &BPP_SCHEMA,
            ProblemKind::AcoTsp => &ACO_TSP_SCHEMA,
        }
    }

    /// Whether a smaller objective is better.
    pub fn minimizes(&self) -> bool {
        !matches!(self, ProblemKind::Kp)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSpec {
    pub name: &'static str,
    pub unit: &'static str,
    /// Typical range on generated instances.
    pub range: (f64, f64),
}

#[derive(Debug, PartialEq)]
pub struct FeatureSchema {
    pub kind: ProblemKind,
    pub features: &'static [FeatureSpec],
}

/// A resolved variable: its slot in the feature vector plus its name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Feature {
    pub index: usize,
    pub name: &'static str,
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn lookup(&self, name: &str) -> Option<Feature> {
        self.features
            .iter()
            .position(|f| f.name == name)
            .map(|index| self.feature(index))
    }

    pub fn feature(&self, index: usize) -> Feature {
        Feature {
            index,
            name: self.features[index].name,
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.features.iter().map(|f| f.name)
    }
}

pub static TSP_SCHEMA: FeatureSchema = FeatureSchema {
    kind: ProblemKind::Tsp,
    features: &[
        FeatureSpec { name: "dist_to_cand", unit: "distance from the current node to the candidate", range: (0.0, 1.5) },
        FeatureSpec { name: "dist_cand_to_dest", unit: "distance from the candidate to the destination (start) node", range: (0.0, 1.5) },
        FeatureSpec { name: "cand_mean_dist_unvisited", unit: "mean distance from the candidate to the other unvisited nodes", range: (0.0, 1.5) },
        FeatureSpec { name: "cand_min_dist_unvisited", unit: "min distance from the candidate to the other unvisited nodes", range: (0.0, 1.5) },
        FeatureSpec { name: "frac_remaining", unit: "unvisited nodes / all nodes", range: (0.0, 1.0) },
    ],
};

pub static KP_SCHEMA: FeatureSchema = FeatureSchema {
    kind: ProblemKind::Kp,
    features: &[
        FeatureSpec { name: "value", unit: "item value", range: (0.0, 1.0) },
        FeatureSpec { name: "weight", unit: "item weight", range: (0.0, 1.0) },
        FeatureSpec { name: "remaining_capacity", unit: "capacity left in the knapsack", range: (0.0, 25.0) },
        FeatureSpec { name: "frac_items_left", unit: "items not yet packed / all items", range: (0.0, 1.0) },
    ],
};

pub static BPP_SCHEMA: FeatureSchema = FeatureSchema {
    kind: ProblemKind::Bpp,
    features: &[
        FeatureSpec { name: "item_size", unit: "size of the arriving item", range: (1.0, 500.0) },
        FeatureSpec { name: "bin_residual", unit: "free space of the scored bin (capacity for a new bin)", range: (0.0, 500.0) },
        FeatureSpec { name: "frac_bins_open", unit: "open bins / items seen so far", range: (0.0, 1.0) },
    ],
};

pub static ACO_TSP_SCHEMA: FeatureSchema = FeatureSchema {
    kind: ProblemKind::AcoTsp,
    features: &[
        FeatureSpec { name: "d_ij", unit: "length of edge i -> j", range: (0.0, 1.5) },
        FeatureSpec { name: "d_j_mean", unit: "mean distance from j to every other node", range: (0.0, 1.5) },
        FeatureSpec { name: "d_j_min", unit: "distance from j to its nearest neighbour", range: (0.0, 1.5) },
    ],
};

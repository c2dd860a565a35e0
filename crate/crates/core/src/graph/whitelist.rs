use super::{NodeType, Relation};

use NodeType::*;
use Relation::*;

/// Every permitted (relation, source type, destination type) triple.
pub const ALLOWED_TRIPLES: [(Relation, NodeType, NodeType); 13] = [
    (Tests, H, T),
    (Tests, J, T),
    (Observes, T, E),
    (UpdatesTo, H, H),
    (CompetesWith, H, H),
    (Contradicts, E, H),
    (Contradicts, J, H),
    (Informs, E, H),
    (Informs, E, J),
    (Informs, E, C),
    (Informs, J, C),
    (Informs, J, H),
    (Informs, J, J),
];

pub fn allowed(relation: Relation, src: NodeType, dst: NodeType) -> bool {
    ALLOWED_TRIPLES.contains(&(relation, src, dst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_checks() {
        assert!(allowed(Tests, H, T));
        assert!(!allowed(Observes, E, T));
        assert!(allowed(Informs, J, J));
        assert!(!allowed(Tests, E, T));
    }

    #[test]
    fn neutral_and_final_nodes_never_connect() {
        for r in Relation::ALL {
            for t in NodeType::ALL {
                assert!(!allowed(r, N, t) && !allowed(r, t, N));
                assert!(!allowed(r, F, t) && !allowed(r, t, F));
            }
        }
    }
}

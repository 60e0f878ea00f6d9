mod common;

use common::invariants::*;
use common::strategies;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn polar_is_an_involution(k in strategies::cone(4, 5)) {
        prop_assert!(polar_involution(&k));
    }

    #[test]
    fn polar_of_generated_cones(k in strategies::generated_cone(4, 5)) {
        prop_assert!(polar_involution(&k));
    }

    #[test]
    fn double_description_round_trip(k in strategies::cone(4, 6)) {
        prop_assert!(dd_round_trip(&k));
    }

    #[test]
    fn generated_round_trip(k in strategies::generated_cone(4, 6)) {
        prop_assert!(dd_round_trip(&k));
    }

    #[test]
    fn faces_closed_under_intersection(k in strategies::cone(3, 5)) {
        prop_assert!(face_intersections_closed(&k));
    }

    #[test]
    fn tangent_sampling_matches_tangent_cone((p, x) in strategies::polyhedron_with_point(3, 4)) {
        prop_assert!(tangent_sampling_agrees(&p, &x));
    }
}

use super::*;

const TABLE: [(i32, i32); 8] = [(-1, 1), (1, -1), (-3, -1), (-1, -3), (-3, 3), (3, -3), (0, 2), (2, 0)];

fn small_configs() -> impl Iterator<Item = Configuration> {
    (0..=8usize).flat_map(|m| (0..=8 - m).map(move |n| Configuration::new(m, n)))
}

fn supported_configs() -> impl Iterator<Item = Configuration> {
    small_configs().filter(|c| c.supported())
}

#[test]
fn sequence_counts() {
    let cfg = Configuration::new(2, 3);
    let v = build_vertex_sequence(&cfg);
    assert_eq!(v.len(), cfg.vertex_count());
    assert_eq!(v.iter().map(|x| x.a).sum::<i32>(), -4);
    assert_eq!(v.iter().map(|x| x.b).sum::<i32>(), -4);
}

#[test]
fn costa_sequence() {
    let v = build_vertex_sequence(&Configuration::new(0, 0));
    let got: Vec<(String, Orientation, i32, i32)> = v.iter().map(|x| (x.label.to_string(), x.orientation, x.a, x.b)).collect();
    use Orientation::*;
    let want = [("C1", Down, -1, -3), ("P1", Up, -3, 3), ("C2", Down, -1, -3), ("H1", Down, 1, -1)];
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert_eq!((g.0.as_str(), g.1, g.2, g.3), w);
    }
}

#[test]
fn table_closure_and_completeness() {
    for cfg in small_configs() {
        let v = build_vertex_sequence(&cfg);
        assert_eq!(v.len(), 2 * cfg.m + 2 * cfg.n + 4);
        assert_eq!(v.iter().map(|x| x.a).sum::<i32>(), -4, "{cfg}");
        assert_eq!(v.iter().map(|x| x.b).sum::<i32>(), -4, "{cfg}");
        for x in &v {
            assert!(TABLE.contains(&(x.a, x.b)), "{cfg} {}", x.label);
            assert_eq!((x.a, x.b), table(x.label.kind, x.orientation));
            assert!(x.is_complete(), "{cfg} {}", x.label);
            assert_eq!((x.a + x.b).rem_euclid(2), 0);
            assert_eq!(x.dh_order, 1 + (x.a + x.b) / 2);
            // Conjugate exponents: (a + 2) + (b + 2) = 0 mod 4.
            assert_eq!((x.a + x.b + 4).rem_euclid(4), 0, "{cfg} {}", x.label);
        }
    }
}

#[test]
fn planar_normals_alternate() {
    for cfg in small_configs() {
        let v = build_vertex_sequence(&cfg);
        let p: Vec<Orientation> = v.iter().filter(|x| x.label.kind == Kind::P).map(|x| x.orientation).collect();
        assert_eq!(p.len(), 2 * cfg.m + 1);
        assert_eq!(p[0], Orientation::Up);
        assert!(p.windows(2).all(|w| w[0] != w[1]));
    }
}

#[test]
fn gauss_degree_balances_and_matches_end_count() {
    for cfg in small_configs() {
        let v = build_vertex_sequence(&cfg);
        let zeros: i32 = v.iter().filter(|x| x.a > x.b).map(|x| x.a - x.b).sum::<i32>() / 2;
        let poles: i32 = v.iter().filter(|x| x.a < x.b).map(|x| x.b - x.a).sum::<i32>() / 2;
        assert_eq!(zeros, poles, "{cfg}");
        assert_eq!(cfg.gauss_degree(), zeros);
        // Embedded ends: deg G = genus - 1 + number of ends.
        let ends = 2 + 2 * cfg.m + 1;
        assert_eq!(cfg.gauss_degree() as usize, cfg.genus() - 1 + ends, "{cfg}");
    }
    let costa = Configuration::new(0, 0);
    assert_eq!(costa.gauss_degree() as usize, costa.genus() + 2);
}

#[test]
fn polygon_order_is_a_rotation_of_the_cycle() {
    for cfg in small_configs() {
        let seq = build_vertex_sequence(&cfg);
        let order = cfg.polygon_order();
        assert_eq!(order.last().unwrap().label, Label { kind: Kind::H, index: cfg.n + 1 });
        let shift = order.iter().position(|x| x.label == seq[0].label).unwrap();
        for (k, x) in order.iter().enumerate() {
            assert_eq!(x, &seq[(k + seq.len() - shift) % seq.len()]);
        }
    }
}

#[test]
fn mirror_is_an_involution_fixing_no_edge() {
    for cfg in small_configs() {
        for e in 0..cfg.vertex_count() {
            let f = cfg.mirror_edge(e);
            assert_eq!(cfg.mirror_edge(f), e);
            assert_ne!(f, e);
        }
        for e in cfg.left_edges() {
            assert!(!cfg.left_edges().contains(&cfg.mirror_edge(e)));
        }
    }
}

#[test]
fn cycle_counts_match_dimension() {
    for cfg in supported_configs() {
        if cfg.m == cfg.n && cfg.m >= 4 {
            // beta_k with 2k > m + 1 would cross the symmetry diagonal.
            assert!(matches!(build_cycle_system(&cfg), Err(Error::InvalidCycle(_))), "{cfg}");
            continue;
        }
        let cs = build_cycle_system(&cfg).unwrap();
        assert_eq!(cs.len(), cfg.m + cfg.n, "{cfg}");
        let mut names: Vec<&str> = cs.cycles.iter().map(|c| c.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), cs.len());
    }
    assert_eq!(build_cycle_system(&Configuration::new(2, 4)).unwrap().len(), 6);
}

#[test]
fn dh11_cycles_are_mauve_and_blue() {
    let cfg = Configuration::new(1, 1);
    let cs = build_cycle_system(&cfg).unwrap();
    let colors = colored_cycles(&cfg).unwrap();
    let e = |x: &str, y: &str| {
        let parse = |s: &str| {
            let kind = match &s[..1] {
                "C" => Kind::C,
                "P" => Kind::P,
                _ => Kind::H,
            };
            Label { kind, index: s[1..].parse().unwrap() }
        };
        cfg.edge(parse(x), parse(y)).unwrap()
    };
    let mu = cs.get("mu").unwrap();
    assert_eq!(mu.components, vec![(e("C1", "P1"), e("C2", "P3"))]);
    let nu = cs.get("nu").unwrap();
    assert_eq!(nu.components, vec![(e("C1", "P1"), e("H1", "H2")), (e("C2", "P3"), e("H3", "H2"))]);
    let same = |a: &crate::polygon::Cycle, b: &crate::polygon::Cycle| {
        let mut x = a.components.clone();
        let mut y = b.components.clone();
        for v in [&mut x, &mut y] {
            for p in v.iter_mut() {
                *p = (p.0.min(p.1), p.0.max(p.1));
            }
            v.sort();
        }
        x == y
    };
    assert!(same(mu, colors.get("mauve").unwrap()));
    assert!(same(nu, colors.get("blue").unwrap()));
}

#[test]
fn dh33_contains_gamma() {
    let cfg = Configuration::new(3, 3);
    let cs = build_cycle_system(&cfg).unwrap();
    let h = |i| Label { kind: Kind::H, index: i };
    let gamma = cs.get("gamma").unwrap();
    assert_eq!(gamma.components, vec![(cfg.edge(h(2), h(3)).unwrap(), cfg.edge(h(5), h(6)).unwrap())]);
}

#[test]
fn obstructed_configurations_have_no_cycle_system() {
    for cfg in small_configs().filter(|c| c.m > c.n) {
        assert!(cfg.obstructed());
        assert!(matches!(build_cycle_system(&cfg), Err(Error::Obstructed { .. })));
    }
}

#[test]
fn coordinate_cycles_are_well_formed() {
    for cfg in supported_configs().filter(|c| c.n >= 1) {
        let cs = coordinate_cycles(&cfg).unwrap();
        let poly = cfg.polygon(&vec![0.0; cfg.dim()]).unwrap();
        let alphas = cs.cycles.iter().filter(|c| c.name.starts_with("alpha_")).count();
        assert_eq!(alphas, 2 * cfg.n + 2, "{cfg}");
        for c in &cs.cycles {
            c.validate_structure(&poly).unwrap_or_else(|e| panic!("{cfg} {}: {e}", c.name));
        }
    }
}

#[test]
fn retraction_point_is_admissible_and_symmetric() {
    for cfg in supported_configs().filter(|c| c.m >= 1 && c.m + c.n <= 6) {
        let gc = retraction_point(&cfg).unwrap();
        validate_coordinates(&gc).unwrap_or_else(|v| panic!("{cfg}: {v:?}"));
        let q = gc.expand();
        let outer: f64 = cfg.outer_edges().iter().map(|&k| q[k]).sum();
        assert!((outer - 1.0).abs() < 1e-12, "{cfg}: {outer}");
        let cs = coordinate_cycles(&cfg).unwrap();
        for k in 1..=2 * cfg.n + 2 {
            let a = gc.period(cs.get(&format!("alpha_{k}")).unwrap()).unwrap().norm();
            let b = gc.period(cs.get(&format!("alpha_{}", 2 * cfg.n + 3 - k)).unwrap()).unwrap().norm();
            assert!((a - b).abs() < 1e-12, "{cfg} alpha_{k}: {a} {b}");
        }
        // Developed boundary closes.
        let pos = gc.develop();
        assert!(pos.iter().flatten().all(|z| z.is_finite()));
    }
}

#[test]
fn zero_coordinate_is_a_violation() {
    for cfg in [Configuration::new(1, 1), Configuration::new(1, 2), Configuration::new(2, 2)] {
        let gc = retraction_point(&cfg).unwrap();
        for i in 0..cfg.n {
            let mut v = gc.values.clone();
            v[i] = 0.0;
            let bad = GeometricCoordinates::new(cfg, v).unwrap();
            assert!(validate_coordinates(&bad).is_err(), "{cfg} coordinate {i}");
        }
    }
}

#[test]
fn branch_point_past_its_box_is_reported() {
    let cfg = Configuration::new(1, 1);
    let gc = retraction_point(&cfg).unwrap();
    let rows = box_constraints(&cfg, &gc.values).unwrap();
    // Move the inner coordinate along one gradient until that row goes negative.
    let (name, f0, grad) = rows.iter().find(|r| r.2[cfg.n..].iter().any(|g| g.abs() > 1e-9)).unwrap();
    let g = grad[cfg.n];
    let mut v = gc.values.clone();
    v[cfg.n] -= 1.5 * f0 / g;
    let errs = validate_coordinates(&GeometricCoordinates::new(cfg, v).unwrap()).unwrap_err();
    assert!(errs.iter().any(|e| e.rule.contains(name.as_str())), "{name}: {errs:?}");
}

#[test]
fn wrong_dimension_is_rejected() {
    let cfg = Configuration::new(1, 2);
    assert!(GeometricCoordinates::new(cfg, vec![0.1]).is_err());
    let gc = GeometricCoordinates { cfg, values: vec![0.1] };
    assert!(validate_coordinates(&gc).is_err());
}

#[test]
fn offsets_round_trip_through_coordinates() {
    let cfg = Configuration::new(1, 1);
    let gc = retraction_point(&cfg).unwrap();
    let q = gc.expand();
    let back = GeometricCoordinates::from_offsets(cfg, &q).unwrap();
    for (a, b) in back.values.iter().zip(&gc.values) {
        assert!((a - b).abs() < 1e-14);
    }
    // Closure: the signed offsets satisfy the linear closure relation.
    let s: f64 = cfg.closure_coefficients().iter().map(|(k, c)| c * q[*k]).sum();
    assert!(s.abs() < 1e-12);
}

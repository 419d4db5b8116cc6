mod common;

use nanojet::objective::{eval_penalty, penalty_gradient};
use nanojet::{DesignField, Discretization, DomainSpec, Mesh, PmlConfig, WaveConfig, WavenumberField, C64};
use proptest::prelude::*;

fn setup(points_per_wavelength: f64, wavelength: f64) -> (Mesh, WaveConfig, Discretization) {
    let wave = WaveConfig::new(wavelength);
    let mesh = Mesh::build(&DomainSpec { points_per_wavelength, ..DomainSpec::default() }, wavelength).unwrap();
    let disc = Discretization::new(&mesh, &wave, &PmlConfig::default());
    (mesh, wave, disc)
}

#[test]
fn free_space_total_field_is_the_plane_wave() {
    let (mesh, wave, disc) = setup(10.0, 1.0);
    let sol = disc.solve(&mesh, &WavenumberField::free_space(&mesh, &wave)).unwrap();
    assert!(sol.u_sca.max_abs() <= 1e-8);
    for (v, z) in sol.u_tot.values().iter().enumerate() {
        let exact = wave.incident(mesh.to_physical(mesh.vertex(v)));
        assert!((z - exact).norm() <= 1e-12);
    }
}

#[test]
fn vanishing_contrast_gives_vanishing_scattering() {
    // e^-60 ~ 1e-26: the assembly and load paths run but the lens is invisible
    let (mesh, wave, disc) = setup(10.0, 1.0);
    let tau = DesignField(vec![-60.0; mesh.num_vertices()]);
    let k = nanojet::helmholtz::wavenumber_field(&tau, None, &wave, &mesh).unwrap();
    let sol = disc.solve(&mesh, &k).unwrap();
    assert!(sol.u_sca.max_abs() <= 1e-8, "{}", sol.u_sca.max_abs());
}

fn point_load(mesh: &Mesh, p: [f64; 2]) -> Vec<C64> {
    let loc = mesh.locate_physical(p).unwrap();
    let mut rhs = vec![C64::new(0.0, 0.0); mesh.num_vertices()];
    for (&v, &w) in mesh.triangle(loc.triangle).iter().zip(&loc.weights) {
        rhs[v] = C64::new(w, 0.0);
    }
    rhs
}

#[test]
fn green_function_is_reciprocal_with_a_heterogeneous_lens() {
    let (mesh, wave, disc) = setup(10.0, 1.0);
    let bump = common::lcg_vector(9, mesh.num_vertices());
    let base = DesignField::homogeneous(&mesh, &wave, 1.5).unwrap();
    let tau = DesignField(base.0.iter().zip(&bump).map(|(t, b)| t + 0.3 * b).collect());
    let k = nanojet::helmholtz::wavenumber_field(&tau, None, &wave, &mesh).unwrap();
    let f = disc.factorize(&disc.assemble(&mesh, &k).matrix).unwrap();
    let (a, b) = ([1.3, 2.1], [8.6, 7.4]);
    let (ra, rb) = (point_load(&mesh, a), point_load(&mesh, b));
    let ga = f.solve(&ra).unwrap();
    let gb = f.solve(&rb).unwrap();
    let ab: C64 = ga.values().iter().zip(&rb).map(|(x, y)| x * y).sum();
    let ba: C64 = gb.values().iter().zip(&ra).map(|(x, y)| x * y).sum();
    assert!((ab - ba).norm() <= 1e-10 * ab.norm(), "{ab} vs {ba}");
}

#[test]
fn layer_absorbs_an_outgoing_point_source() {
    let (mesh, wave, disc) = setup(20.0, 1.0);
    let sys = disc.assemble(&mesh, &WavenumberField::free_space(&mesh, &wave));
    let u = disc.factorize(&sys.matrix).unwrap().solve(&point_load(&mesh, [5.0, 5.0])).unwrap();
    let side = mesh.spec().side;
    let mut edge: f64 = 0.0;
    let mut deep: f64 = 0.0;
    for v in 0..mesh.num_vertices() {
        let p = mesh.to_physical(mesh.vertex(v));
        let out = (-p[0]).max(-p[1]).max(p[0] - side).max(p[1] - side);
        if out.abs() < 1e-9 {
            edge = edge.max(u.0[v].norm());
        } else if out > 0.75 * mesh.spec().pml_width {
            deep = deep.max(u.0[v].norm());
        }
    }
    // one-way decay exp(-∫σ) to depth 3w/4 is R^((3/4)^3 / 2) for the quadratic profile
    let decay = PmlConfig::default().reflection.powf(0.75f64.powi(3) / 2.0);
    println!("physical edge {edge:.3e}, outer quarter of the layer {deep:.3e}, plane-wave decay {decay:.3e}");
    assert!(deep <= 1.5 * decay * edge);
}

#[test]
fn penalty_gradient_matches_finite_differences() {
    let mesh = Mesh::build(&DomainSpec { points_per_wavelength: 10.0, ..DomainSpec::default() }, 2.0).unwrap();
    let n = mesh.num_vertices();
    let tau = DesignField(common::lcg_vector(1, n).iter().map(|x| 0.2 * x).collect());
    let g = penalty_gradient(&tau, &mesh, 1e-3);
    let h = 1e-6;
    for k in 0..5 {
        let d = common::lcg_vector(20 + k, n);
        let shift = |s: f64| DesignField(tau.0.iter().zip(&d).map(|(t, dv)| t + s * dv).collect());
        let fd = (eval_penalty(&shift(h), &mesh, 1e-3) - eval_penalty(&shift(-h), &mesh, 1e-3)) / (2.0 * h);
        let exact: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "{fd} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn penalty_is_even_and_bounded_below(scale in -5.0f64..5.0, eps in 1e-6f64..1e-1, seed in 0u64..1000) {
        let mesh = Mesh::build(&DomainSpec { points_per_wavelength: 10.0, ..DomainSpec::default() }, 3.0).unwrap();
        let n = mesh.num_vertices();
        let tau = DesignField(common::lcg_vector(seed, n).iter().map(|x| scale * x).collect());
        let neg = DesignField(tau.0.iter().map(|t| -t).collect());
        let p = eval_penalty(&tau, &mesh, eps);
        prop_assert!((p - eval_penalty(&neg, &mesh, eps)).abs() <= 1e-12 * p);
        prop_assert!(p >= eps.sqrt() * mesh.lens_area() * (1.0 - 1e-12));
    }
}

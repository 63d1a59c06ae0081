use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fuchs_core::hypersurface::{FormKind, Hypersurface};
use fuchs_core::ode::{OdeCaps, SingularODE};
use fuchs_core::serial::{self, Document};
use fuchs_core::transform::{map_vars, NormalizedMap};
use fuchs_core::{Coeff, GaussRat, Jet};

fn fuchs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuchs")).args(args).current_dir(dir).output().unwrap()
}

fn write(dir: &Path, name: &str, doc: &Document<GaussRat>) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serial::to_string(doc)).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let model = Hypersurface::<GaussRat>::model(FormKind::Real, 1, 1, 6).unwrap();
    write(d, "model.json", &Document::Hypersurface(model));
    let o = fuchs(d, &["check", "model.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let bad = Hypersurface::from_h(2, 1, 8, [((2, 2), vec![(0, GaussRat::one())])]).unwrap();
    write(d, "bad.json", &Document::Hypersurface(bad));
    let o = fuchs(d, &["check", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("ord h22 = 0 < 1"), "{}", stdout(&o));

    let low = Hypersurface::<GaussRat>::model(FormKind::Real, 2, 1, 3).unwrap();
    write(d, "low.json", &Document::Hypersurface(low));
    assert_eq!(fuchs(d, &["check", "low.json"]).status.code(), Some(2));

    std::fs::write(d.join("broken.json"), "{\"format\": ").unwrap();
    let o = fuchs(d, &["check", "broken.json"]);
    assert_eq!(o.status.code(), Some(3));
    let said = format!("{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(said.contains("line 1 column"), "{said}");

    // several files: the worst code wins
    assert_eq!(fuchs(d, &["--jobs", "2", "check", "model.json", "bad.json"]).status.code(), Some(1));
}

#[test]
fn model_maps_to_itself_by_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let e = SingularODE::<GaussRat>::model(2, OdeCaps::with_margin(2, 2));
    write(d, "e.json", &Document::Ode(e));
    let o = fuchs(d, &["solve-map", "--source", "e.json", "--target", "e.json", "-o", "id.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.join("id.json")).unwrap();
    match serial::from_str::<GaussRat>(&text).unwrap() {
        Document::Map(h) => assert!(h.is_identity()),
        other => panic!("expected a map, got {}", other.kind()),
    }
    let o = fuchs(d, &["verify-map", "--source", "e.json", "--target", "e.json", "--map", "id.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn corrupted_map_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = 1;
    let e = SingularODE::<GaussRat>::model(m, OdeCaps::with_margin(m, 2));
    write(d, "e.json", &Document::Ode(e));
    let id = NormalizedMap::<GaussRat>::identity(m, 6);
    let f = Jet::zero_total(map_vars(), 6).monomial_like(&[2, 1], GaussRat::rat(1, 3));
    let bad = NormalizedMap::new_unchecked(m, f, id.g0().clone(), id.g().clone()).unwrap();
    write(d, "bad.json", &Document::Map(bad));
    let o = fuchs(d, &["verify-map", "--source", "e.json", "--target", "e.json", "--map", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("nonzero residual"), "{}", stdout(&o));
}

#[test]
fn wrong_version_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let e = SingularODE::<GaussRat>::model(1, OdeCaps::for_m(1));
    let text = serial::to_string(&Document::Ode(e)).replace("\"version\": 1", "\"version\": 7");
    std::fs::write(d.join("e.json"), text).unwrap();
    assert_eq!(fuchs(d, &["check", "e.json"]).status.code(), Some(3));
}

#[test]
fn briot_bouquet_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let one = GaussRat::one();
    let sys = fuchs_core::bb::BbSystem::from_terms(1, 6, vec![vec![(vec![0, 1], one.clone()), (vec![1, 0], one.clone())]]).unwrap();
    write(d, "res.json", &Document::Bb(sys, None));
    let o = fuchs(d, &["bb-solve", "--system", "res.json"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));

    let sys = fuchs_core::bb::BbSystem::from_terms(1, 6, vec![vec![(vec![0, 1], one.clone()), (vec![0, 2], one)]]).unwrap();
    write(d, "quad.json", &Document::Bb(sys, None));
    let o = fuchs(d, &["bb-flatness", "--system", "quad.json", "--from", "1", "--to", "1e-4", "--y0", "0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("holds"), "{}", stdout(&o));
}

use homog_cli::plot::{emit_plot, render_svg};
use homog_cli::record::{write_csv, write_csv_file};
use homog_cli::SweepRecord;
use homog_core::Method;

fn rec(method: Method, q: u32, r: f64, err: f64) -> SweepRecord {
    let mut rec = SweepRecord::failed(method, r, q, 2.0 / 3.0, 1.0 / 32.0, 0);
    rec.err_fro = err;
    rec
}

fn two_groups() -> Vec<SweepRecord> {
    vec![
        rec(Method::Parabolic, 3, 4.0, 1e-2),
        rec(Method::Parabolic, 3, 8.0, 1e-4),
        rec(Method::EllipticStandard, 1, 4.0, 5e-2),
        rec(Method::EllipticStandard, 1, 8.0, 2.5e-2),
    ]
}

#[test]
fn one_polyline_per_group() {
    let svg = render_svg(&two_groups()).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("parabolic q=3") && svg.contains("elliptic_standard q=1"));
}

#[test]
fn guide_slopes_follow_the_filter_order() {
    let svg = render_svg(&two_groups()).unwrap();
    assert!(svg.contains("guide slope -4"));
    assert!(svg.contains("guide slope -2"));
    assert_eq!(svg.matches(r#"class="guide""#).count(), 2);
}

#[test]
fn svg_is_well_formed_and_self_contained() {
    let mut recs = two_groups();
    recs.push(rec(Method::EllipticRegularized, 2, 4.0, f64::NAN));
    let svg = render_svg(&recs).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert!(!svg.contains("href"));
    assert!(svg.contains("(no data)"));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    write_csv_file(&csv, &two_groups(), &["note".into()]).unwrap();
    let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
    emit_plot(&csv, &a).unwrap();
    emit_plot(&csv, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn empty_csv_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    let mut buf = Vec::new();
    write_csv(&mut buf, &[], &[]).unwrap();
    std::fs::write(&csv, buf).unwrap();
    assert!(emit_plot(&csv, &dir.path().join("x.svg")).is_err());
    assert!(render_svg(&[]).is_err());
}

use homog_cli::record::{fmt_float, read_csv, write_csv};
use homog_cli::{SweepRecord, HEADER};
use homog_core::Method;

fn sample() -> Vec<SweepRecord> {
    let awkward = [1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE / 8.0, 0.1 + 0.2, -0.0];
    awkward
        .iter()
        .enumerate()
        .map(|(i, &x)| SweepRecord {
            method: Method::ALL[i % 4],
            r: 4.0 + i as f64,
            l: x,
            t: x * 7.0,
            q: i as u32,
            k_o: 2.0 / 3.0,
            h: 1.0 / 32.0,
            nt: 10 * i,
            a: [[x, -x], [x.sqrt().max(0.0), std::f64::consts::PI]],
            err_fro: x.abs(),
            dofs: 1 << i,
            matvecs: 12345 * i,
            walltime_ms: 0.001 * i as f64,
            seed: u64::MAX - i as u64,
        })
        .collect()
}

#[test]
fn header_is_exact() {
    let mut buf = Vec::new();
    write_csv(&mut buf, &[], &[]).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "method,R,L,T,q,ko,h,nt,a11,a12,a21,a22,err_fro,dofs,matvecs,walltime_ms,seed\n"
    );
    assert_eq!(HEADER.split(',').count(), 17);
}

#[test]
fn rows_round_trip_exactly() {
    let recs = sample();
    let mut buf = Vec::new();
    write_csv(&mut buf, &recs, &["a note".into(), "two\nlines".into()]).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("# a note\n# two\n# lines\n"));
    let back = read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), recs.len());
    for (a, b) in recs.iter().zip(&back) {
        assert!(a.same_numbers(b), "{a:?} vs {b:?}");
        assert_eq!(a.walltime_ms.to_bits(), b.walltime_ms.to_bits());
    }
}

#[test]
fn nan_rows_round_trip() {
    let rec = SweepRecord::failed(Method::Parabolic, 6.0, 3, 0.5, 0.125, 7);
    let mut buf = Vec::new();
    write_csv(&mut buf, std::slice::from_ref(&rec), &[]).unwrap();
    let back = read_csv(buf.as_slice()).unwrap();
    assert!(back[0].err_fro.is_nan() && rec.same_numbers(&back[0]));
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let s = fmt_float(0.1);
    let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
    assert_eq!(s.parse::<f64>().unwrap(), 0.1);
}

#[test]
fn comments_may_appear_between_rows() {
    let text = format!("# start\n{HEADER}\n# middle\n");
    assert!(read_csv(text.as_bytes()).unwrap().is_empty());
    assert!(read_csv("method,R\n".as_bytes()).is_err());
    let bad = format!("{HEADER}\nparabolic,1,2\n");
    assert!(read_csv(bad.as_bytes()).is_err());
}

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semcom_core::phy::{
    awgn_channel, decode_rate_matched, noise_variance, qpsk_llr, qpsk_modulate, rate_match, simulate_bler, CodeRate,
    InfoBlockSize, LdpcCode, LinkConfig, MinSumDecoder,
};

fn message(k: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..k).map(|_| rng.random::<bool>() as u8).collect()
}

fn encode(c: &mut Criterion) {
    let mut g = c.benchmark_group("ldpc_encode");
    for size in [InfoBlockSize::B1056, InfoBlockSize::A8448] {
        let code = LdpcCode::new(size);
        let m = message(code.k());
        g.bench_with_input(BenchmarkId::from_parameter(size.bits()), &m, |b, m| {
            b.iter(|| code.encode(m).unwrap())
        });
    }
    g.finish();
}

fn decode(c: &mut Criterion) {
    let mut g = c.benchmark_group("ldpc_decode_2db");
    for rate in [CodeRate::OneThird, CodeRate::FiveSixths] {
        let code = LdpcCode::new(InfoBlockSize::B1056);
        let tx = rate_match(&code, &code.encode(&message(code.k())).unwrap(), rate);
        let rx = awgn_channel(&qpsk_modulate(&tx), 2.0, &mut ChaCha8Rng::seed_from_u64(2));
        let llrs = qpsk_llr(&rx, noise_variance(2.0));
        let mut dec = MinSumDecoder::new(&code, 46);
        g.bench_function(rate.to_string(), |b| {
            b.iter(|| decode_rate_matched(&code, &mut dec, &llrs, 20))
        });
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let cfg = LinkConfig::new(InfoBlockSize::B1056, CodeRate::OneHalf, 2.0, 0);
    c.bench_function("simulate_bler_100_blocks", |b| {
        b.iter(|| simulate_bler(&cfg, 100).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = encode, decode, monte_carlo
}
criterion_main!(benches);

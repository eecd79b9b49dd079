use atom_core::crypto::{enc, keygen, reenc, shuffle_rows, Ciphertext};
use atom_core::group::{PrimeGroup, TestGroup, P256};
use atom_core::rng;
use atom_core::zk::{reenc_proof, shuffle_proof, verify_reenc_proof, verify_shuffle_proof};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn single<G: PrimeGroup>(c: &mut Criterion, name: &str) {
    let mut r = rng::seeded(1);
    let (a, b) = (keygen::<G, _>(&mut r), keygen::<G, _>(&mut r));
    let pk = a.public * b.public;
    let m = G::pow_g(&G::random_scalar(&mut r));
    let ct = enc::<G, _>(&pk, &m, &mut r);
    let mut g = c.benchmark_group(name);
    g.bench_function("enc", |bench| bench.iter(|| enc::<G, _>(black_box(&pk), &m, &mut r)));
    g.bench_function("reenc", |bench| bench.iter(|| reenc::<G, _>(&a.secret, Some(&b.public), black_box(&ct), &mut r)));
    let (out, proof) = reenc_proof::<G, _>(&a.secret, Some(&b.public), &ct, &mut r);
    g.bench_function("reenc_prove", |bench| {
        bench.iter(|| reenc_proof::<G, _>(&a.secret, Some(&b.public), black_box(&ct), &mut r))
    });
    g.bench_function("reenc_verify", |bench| {
        bench.iter(|| verify_reenc_proof::<G>(&a.public, Some(&b.public), black_box(&ct), &out, &proof))
    });
    g.finish();
}

fn batch<G: PrimeGroup>(c: &mut Criterion, name: &str) {
    let mut r = rng::seeded(2);
    let pk = keygen::<G, _>(&mut r).public;
    let m = G::pow_g(&G::random_scalar(&mut r));
    let mut g = c.benchmark_group(name);
    g.sample_size(10);
    for n in [64usize, 256] {
        let rows: Vec<Vec<Ciphertext<G>>> = (0..n).map(|_| vec![enc::<G, _>(&pk, &m, &mut r)]).collect();
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::new("shuffle", n), &rows, |bench, rows| {
            bench.iter(|| shuffle_rows::<G, _>(&pk, rows, &mut r).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("shuffle_prove", n), &rows, |bench, rows| {
            bench.iter(|| shuffle_proof::<G, _>(&pk, rows, &mut r).unwrap())
        });
        let (out, proof) = shuffle_proof::<G, _>(&pk, &rows, &mut r).unwrap();
        g.bench_with_input(BenchmarkId::new("shuffle_verify", n), &rows, |bench, rows| {
            bench.iter(|| verify_shuffle_proof::<G>(&pk, rows, &out, &proof).unwrap())
        });
    }
    g.finish();
}

fn primitives(c: &mut Criterion) {
    single::<P256>(c, "p256");
    single::<TestGroup>(c, "test_group");
    batch::<P256>(c, "p256_batch");
}

criterion_group!(benches, primitives);
criterion_main!(benches);

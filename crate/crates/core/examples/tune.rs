use rhythmdet_core::nn::{Model, ModelConfig, TrainConfig, Trainer, training_accuracy};
use rhythmdet_core::spectrogram::SpectroSegment;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn striped(count: usize, cols: usize, seed: u64) -> (Vec<SpectroSegment>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = 20;
    let mut segments = Vec::new();
    let mut labels = Vec::new();
    for i in 0..count {
        let class = i % 4;
        let mut matrix: Vec<f64> = (0..rows*cols).map(|_| rng.gen_range(0.0..0.2)).collect();
        for v in &mut matrix[3*class*cols..(3*class+1)*cols] { *v += 1.0; }
        segments.push(SpectroSegment { matrix, width: cols, anchor_peak: 0 });
        labels.push(class);
    }
    (segments, labels)
}

fn main() {
    let (segments, labels) = striped(40, 225, 40);
    for (lr, batch) in [(0.05, 2), (0.1, 2), (0.05, 4), (0.1, 4), (0.2, 4), (0.1, 8), (0.2, 8)] {
        let mut results = Vec::new();
        for seed in [11u64, 44, 45, 46, 47] {
            let mut model = Model::new(ModelConfig::reduced(4, 4, 20, 225), seed).unwrap();
            let cfg = TrainConfig { epochs: 15, batch_size: batch, learning_rate: lr, seed: 43, ..Default::default() };
            let mut trainer = Trainer::new(&model, segments.len(), &cfg).unwrap();
            let mut steps = 0;
            let mut hit = 0usize;
            while steps < 200 {
                for _ in 0..10 { trainer.step(&mut model, &segments, &labels).unwrap(); steps += 1; }
                if training_accuracy(&model, &segments, &labels).unwrap() == 1.0 { hit = steps; break; }
            }
            results.push(hit);
        }
        println!("lr {lr} batch {batch}: steps to 100% per seed {results:?} (0 = failed)");
    }
}

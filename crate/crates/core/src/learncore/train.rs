use rand::seq::SliceRandom;
use rand::Rng;

use super::loss::{loss_and_grad, loss_value, Objective};
use super::mlp::Mlp;
use super::optim::Adam;
use crate::error::{Error, Result};

/// Labelled rows for supervised fitting.
#[derive(Clone, Debug, PartialEq)]
pub enum SupervisedData {
    Classes { inputs: Vec<Vec<f64>>, labels: Vec<usize> },
    Targets { inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>> },
}

impl SupervisedData {
    pub fn len(&self) -> usize {
        match self {
            SupervisedData::Classes { inputs, .. } | SupervisedData::Targets { inputs, .. } => inputs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn loss(&self, net: &Mlp, idx: &[usize], grad: bool) -> Result<(f64, Option<super::Grads>)> {
        match self {
            SupervisedData::Classes { inputs, labels } => {
                let x: Vec<Vec<f64>> = idx.iter().map(|&i| inputs[i].clone()).collect();
                let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
                let obj = Objective::CrossEntropy { inputs: &x, labels: &y };
                eval(net, &obj, grad)
            }
            SupervisedData::Targets { inputs, targets } => {
                let x: Vec<Vec<f64>> = idx.iter().map(|&i| inputs[i].clone()).collect();
                let y: Vec<Vec<f64>> = idx.iter().map(|&i| targets[i].clone()).collect();
                let obj = Objective::Mse { inputs: &x, targets: &y };
                eval(net, &obj, grad)
            }
        }
    }
}

fn eval(net: &Mlp, obj: &Objective, grad: bool) -> Result<(f64, Option<super::Grads>)> {
    if grad {
        let (l, g) = loss_and_grad(net, obj)?;
        Ok((l, Some(g)))
    } else {
        Ok((loss_value(net, obj)?, None))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip_norm: Option<f64>,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper { learning_rate: 3e-3, batch_size: 32, epochs: 60, clip_norm: Some(5.0) }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        if matches!(self.clip_norm, Some(c) if c <= 0.0) {
            return Err(Error::Config("clip norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Minibatch Adam over the rows in `train`, keeping the parameters with the
/// lowest loss on `val` (or on `train` when `val` is empty).
pub fn train_supervised<R: Rng + ?Sized>(
    net: &mut Mlp,
    data: &SupervisedData,
    train: &[usize],
    val: &[usize],
    hyper: &TrainHyper,
    rng: &mut R,
) -> Result<TrainReport> {
    hyper.validate()?;
    if train.is_empty() {
        return Err(Error::DegenerateData("no training rows".into()));
    }
    if let Some(&i) = train.iter().chain(val).find(|&&i| i >= data.len()) {
        return Err(Error::Bounds { index: i, len: data.len() });
    }
    let select = if val.is_empty() { train } else { val };
    let mut opt = Adam::new(net, hyper.learning_rate).with_clip(hyper.clip_norm);
    let mut order = train.to_vec();
    let mut best = (0, data.loss(net, select, false)?.0, net.clone());
    let mut report = TrainReport { train_losses: Vec::new(), val_losses: Vec::new(), best_epoch: 0, best_val_loss: best.1 };
    for epoch in 1..=hyper.epochs {
        order.shuffle(rng);
        let mut sum = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            let (l, g) = data.loss(net, batch, true)?;
            opt.step(net, &g.expect("gradient requested"))?;
            sum += l * batch.len() as f64;
        }
        report.train_losses.push(sum / order.len() as f64);
        let v = data.loss(net, select, false)?.0;
        report.val_losses.push(v);
        if v < best.1 {
            best = (epoch, v, net.clone());
        }
    }
    report.best_epoch = best.0;
    report.best_val_loss = best.1;
    *net = best.2;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn learns_a_separable_problem() {
        let mut rng = stream(11, &[]);
        let inputs: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let labels: Vec<usize> = inputs.iter().map(|x| usize::from(x[0] + x[1] > 0.0)).collect();
        let data = SupervisedData::Classes { inputs, labels };
        let mut net = Mlp::new(&[2, 8, 2], 1.0, &mut rng).unwrap();
        let train: Vec<usize> = (0..160).collect();
        let val: Vec<usize> = (160..200).collect();
        let hyper = TrainHyper { learning_rate: 0.02, batch_size: 16, epochs: 40, clip_norm: None };
        let report = train_supervised(&mut net, &data, &train, &val, &hyper, &mut rng).unwrap();
        assert!(report.best_val_loss < 0.25, "{report:?}");
        assert!(report.best_val_loss <= report.val_losses[0]);
    }

    #[test]
    fn rejects_empty_training_set() {
        let data = SupervisedData::Classes { inputs: vec![vec![0.0]], labels: vec![0] };
        let mut net = Mlp::zeros(&[1, 2]).unwrap();
        let err = train_supervised(&mut net, &data, &[], &[0], &TrainHyper::default(), &mut stream(1, &[])).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)));
    }
}

use crate::args::{DataFlags, TrainFlags};
use crate::table::{format_table, TableRow};
use crate::Command;
use anyhow::{bail, ensure, Context, Result};
use brahmi_core::augment::{expand_dataset_with, GENERATOR};
use brahmi_core::dataset::{load_class_tree, stratified_split, write_class_tree, Dataset};
use brahmi_core::image::{decode_image, encode_image, encode_rgb_png, ImageFormat};
use brahmi_core::preprocess::preprocess_with;
use brahmi_core::segment::{box_records, render_overlay, segment_page, write_manifest};
use brahmi_core::synth::{jitter_config, render_synthetic_corpus, synthetic_page, PageLayout};
use brahmi_core::{recognize_page, to_report, Exec, GrayImage, Recognizer};
use brahmi_net::{train_observed, zoo, Architecture, Checkpoint, PoolMode, TrainHistory};
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Offset between a corpus seed and the stream its sample page is drawn from.
const PAGE_STREAM: u64 = 0x7061_6765;

pub(crate) fn dispatch(cmd: Command, exec: Exec, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Preprocess {
            image,
            out: dest,
            preprocess,
        } => {
            let img = read_gray(&image)?;
            let (bin, otsu) = preprocess_with(&img, &preprocess.config(), exec)?;
            write_file(&dest, &encode_image(&bin, image_format(&dest)?))?;
            eprintln!("{} foreground pixels of {}", bin.foreground_count(), img.width() * img.height());
            serde_json::to_writer_pretty(&mut *out, &otsu)?;
            writeln!(out)?;
        }
        Command::Segment {
            image,
            out: dest,
            overlay,
            preprocess,
            segmentation,
        } => {
            let params = segmentation.config();
            params.validate()?;
            let img = read_gray(&image)?;
            let (bin, _) = preprocess_with(&img, &preprocess.config(), exec)?;
            let lines = segment_page(&bin, &params, exec);
            let boxes = box_records(&lines);
            eprintln!("{} lines, {} characters", lines.len(), boxes.len());
            let manifest = write_manifest(&boxes);
            match dest {
                Some(p) => write_file(&p, manifest.as_bytes())?,
                None => out.write_all(manifest.as_bytes())?,
            }
            if let Some(p) = overlay {
                write_file(&p, &encode_rgb_png(&render_overlay(&bin, &lines)))?;
            }
        }
        Command::Augment {
            data,
            out: dest,
            per_class,
            side,
            seed,
            augment,
        } => {
            let ds = load_class_tree(&data, side)?;
            let cfg = augment.config();
            let exp = expand_dataset_with(&ds, per_class, &cfg, seed, exec)?;
            let manifest = json!({
                "generator": GENERATOR,
                "seed": seed,
                "per_class": per_class,
                "side": side,
                "config": cfg,
                "labels": ds.labels(),
                "provenance": exp.provenance,
            });
            write_class_tree(&dest, &exp.dataset, Some(&manifest))?;
            writeln!(
                out,
                "{} samples ({} augmented) in {} classes",
                exp.dataset.len(),
                exp.provenance.len(),
                ds.labels().len()
            )?;
        }
        Command::RenderCorpus {
            classes,
            per_class,
            side,
            seed,
            out: dest,
            page_out,
            page_truth,
            page_lines,
            page_glyphs,
        } => {
            ensure!(classes >= 2, "--classes must be at least 2");
            ensure!(per_class >= 1, "--per-class must be at least 1");
            ensure!(side >= 8, "--side must be at least 8");
            let ds = render_synthetic_corpus(classes, per_class, side, seed)?;
            let manifest = json!({
                "generator": GENERATOR,
                "seed": seed,
                "classes": classes,
                "per_class": per_class,
                "side": side,
                "jitter": jitter_config(),
            });
            write_class_tree(&dest, &ds, Some(&manifest))?;
            writeln!(out, "{} samples in {} classes", ds.len(), classes)?;
            if let Some(p) = page_out {
                ensure!(page_lines >= 1 && page_glyphs >= 1, "a page needs at least one glyph");
                let (page, truth) = synthetic_page(
                    classes,
                    page_lines,
                    page_glyphs,
                    side,
                    seed.wrapping_add(PAGE_STREAM),
                    &PageLayout::default(),
                );
                write_file(&p, &encode_image(&page.image, ImageFormat::Png))?;
                let text: String = truth.iter().map(|l| l.join(" ") + "\n").collect();
                match page_truth {
                    Some(t) => write_file(&t, text.as_bytes())?,
                    None => eprint!("{text}"),
                }
            }
        }
        Command::Train {
            data,
            arch,
            pooling,
            train,
            seed,
            out: dest,
            history,
        } => {
            let arch = Architecture::parse(&arch, pooling)?;
            let (train_ds, val_ds) = load_splits(&data, seed, exec)?;
            let (ck, hist) = fit(arch, &train_ds, &val_ds, &train, seed, exec)?;
            ck.save(&dest).with_context(|| format!("writing {}", dest.display()))?;
            let hist_path = history.unwrap_or_else(|| history_path(&dest));
            write_file(&hist_path, serde_json::to_string_pretty(&hist)?.as_bytes())?;
            let best = hist.best();
            writeln!(
                out,
                "{arch}: best epoch {} of {}, validation accuracy {:.2}%, validation loss {:.4}",
                hist.best_epoch,
                hist.stopped_epoch,
                best.val_accuracy * 100.0,
                best.val_loss
            )?;
        }
        Command::Evaluate {
            data,
            arch,
            pooling,
            train,
            seed,
            out: dest,
        } => {
            let archs = requested_archs(&arch, &pooling)?;
            let (train_ds, val_ds) = load_splits(&data, seed, exec)?;
            if let Some(d) = &dest {
                fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
            }
            let mut rows = Vec::new();
            for a in archs {
                let (ck, hist) = fit(a, &train_ds, &val_ds, &train, seed, exec)?;
                if let Some(d) = &dest {
                    let stem = match a.pooling() {
                        Some(p) => format!("{}-{p}", a.family()),
                        None => a.family().to_string(),
                    };
                    let path = d.join(format!("{stem}.ckpt"));
                    ck.save(&path).with_context(|| format!("writing {}", path.display()))?;
                    write_file(&history_path(&path), serde_json::to_string_pretty(&hist)?.as_bytes())?;
                }
                rows.push(TableRow::from_epoch(a.display_name(), hist.best()));
            }
            out.write_all(format_table(&rows).as_bytes())?;
        }
        Command::Recognize {
            image,
            model,
            format,
            out: dest,
            params,
        } => {
            let rec = Recognizer::load(&model)?;
            let img = read_gray(&image)?;
            let result = recognize_page(&img, &rec, &params.config(), exec)?;
            eprintln!("{} lines, {} characters", result.lines.len(), result.char_count());
            let report = to_report(&result, format.into());
            match dest {
                Some(p) => write_file(&p, &report)?,
                None => out.write_all(&report)?,
            }
        }
        Command::Serve {
            model,
            addr,
            body_limit,
            token_ttl,
        } => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            let rec = model.as_deref().map(Recognizer::load).transpose()?;
            let cfg = brahmi_service::ServiceConfig {
                body_limit,
                token_ttl: Duration::from_secs(token_ttl),
            };
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?
                .block_on(brahmi_service::serve(addr, rec, cfg))?;
        }
    }
    Ok(())
}

fn read_gray(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let img = decode_image(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    Ok(img.into_gray())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn image_format(path: &Path) -> Result<ImageFormat> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => Ok(ImageFormat::Png),
        Some("pgm") => Ok(ImageFormat::Pgm),
        _ => bail!("{}: output must end in .png or .pgm", path.display()),
    }
}

fn history_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("history.json")
}

fn requested_archs(names: &[String], pooling: &[PoolMode]) -> Result<Vec<Architecture>> {
    let names: Vec<&str> = if names.is_empty() {
        vec!["lenet", "vgg_small", "mobilenet_micro"]
    } else {
        names.iter().map(String::as_str).collect()
    };
    let modes = if pooling.is_empty() {
        vec![PoolMode::Max, PoolMode::Avg]
    } else {
        pooling.to_vec()
    };
    let mut out = Vec::new();
    for name in names {
        if name == "mobilenet_micro" {
            for &p in &modes {
                out.push(Architecture::parse(name, Some(p))?);
            }
        } else {
            out.push(Architecture::parse(name, None)?);
        }
    }
    Ok(out)
}

/// Training and validation sets: a separate validation tree or a split of
/// `--data`, with augmentation applied to the training side only.
fn load_splits(flags: &DataFlags, seed: u64, exec: Exec) -> Result<(Dataset, Dataset)> {
    let ds = load_class_tree(&flags.data, flags.side)?;
    let (train, val) = match &flags.val_data {
        Some(p) => {
            let val = load_class_tree(p, flags.side)?;
            ensure!(
                val.labels() == ds.labels(),
                "{} and {} have different classes",
                flags.data.display(),
                p.display()
            );
            (ds, val)
        }
        None => stratified_split(&ds, &flags.split(seed))?,
    };
    let train = match flags.augment_per_class {
        Some(n) => expand_dataset_with(&train, n, &flags.augment.config(), seed, exec)?.dataset,
        None => train,
    };
    eprintln!(
        "{} classes, {} training and {} validation samples",
        train.labels().len(),
        train.len(),
        val.len()
    );
    Ok((train, val))
}

fn fit(
    arch: Architecture,
    train: &Dataset,
    val: &Dataset,
    flags: &TrainFlags,
    seed: u64,
    exec: Exec,
) -> Result<(Checkpoint, TrainHistory)> {
    let (w, h) = train.image_dims().context("training set is empty")?;
    let model = zoo::build(arch, [1, h, w], train.labels().len(), &flags.zoo(seed))?;
    eprintln!("{arch}: {} parameters", model.count_params());
    let cfg = flags.config(arch, seed);
    let (model, hist) = train_observed(
        model,
        &train.to_tensor_set()?,
        &val.to_tensor_set()?,
        &cfg,
        exec,
        |r| {
            eprintln!(
                "{arch} epoch {:>3}: train loss {:.4}, validation loss {:.4}, accuracy {:.2}%",
                r.epoch,
                r.train_loss,
                r.val_loss,
                r.val_accuracy * 100.0
            )
        },
    )?;
    let ck = Checkpoint::new(Some(arch), train.labels().names().to_vec(), model)?;
    Ok((ck, hist))
}

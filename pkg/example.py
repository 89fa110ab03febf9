import logging
from pathlib import Path

import boothcount


def main():
    ##################################################
    # Whole runs
    ##################################################

    # the configuration is read from defaults, an optional INI file and overrides,
    # and validated before anything runs
    config = boothcount.default_config(
        input_preset="n_people(4)", input_seed=3, output_directory="out"
    )
    # counts the scene, writes out/events.csv, out/config.ini and out/report.json
    summary = boothcount.run_count(config)
    print(summary.line())
    if summary.report is not None:
        print(summary.report.table())

    # render a scene to disk, then count it like a recorded video
    paths, truth_path = boothcount.run_synth("single_cross", 7, "scene")
    config = boothcount.load_config(values={
        "input.source": "pgm_dir",
        "input.path": Path("scene"),
        "counter.line": "0,120,320,120",
        "eval.ground_truth": truth_path,
        "output.directory": "out_scene",
    })
    print(boothcount.run_count(config).line())

    ##################################################
    # Stage by stage
    ##################################################

    scene = boothcount.preset("single_cross", seed=7)
    stream, truth = boothcount.generate_scene(scene)
    line = scene.counting_line()
    # size-relative defaults need the frame size
    morph = boothcount.MorphParams().resolve(stream.width, stream.height)
    tracker = boothcount.Tracker(boothcount.TrackerParams().resolve(stream.width, stream.height))
    counter = boothcount.CounterState(line)
    model = boothcount.bg_new(stream.width, stream.height)

    events = []
    for frame in stream:
        mask = boothcount.bg_apply(model, frame)
        cleaned = boothcount.clean_mask(boothcount.binarize(mask), morph)
        labels, _ = boothcount.connected_components(cleaned)
        blobs = boothcount.extract_blobs(labels, morph.min_blob_area)
        tracks = boothcount.tracker_update(tracker, blobs, frame.index)
        events.extend(boothcount.counter_update(counter, tracks, frame.index))

    print(f"occupancy: {boothcount.occupancy(counter)}")
    # score against the scene's own ground truth
    counts = boothcount.match_events(events, truth)
    report = boothcount.render_report(counts)
    print(report.average_f1_text)
    # the learned background, as an image
    boothcount.write_pgm(boothcount.bg_background_image(model), "background.pgm")


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    main()

#!/usr/bin/env python3
"""Render a handful of scenes with bounding boxes burned in, for eyeballing.

Box colors follow the class convention: red for boxes, blue for cylinders,
green for spheres.
"""

import argparse
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from randr.annotate import boxes_from_idmask, downscale_idmask
from randr.config import parse_config
from randr.dataset import texture_master_seed
from randr.render import downscale, render, to_uint8
from randr.sampler import sample_scene
from randr.scene import ShapeClass
from randr.textures import build_texture_library

CLASS_COLORS = {
    ShapeClass.BOX: (255, 64, 64),
    ShapeClass.CYLINDER: (64, 64, 255),
    ShapeClass.SPHERE: (64, 255, 64),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", "-c", required=True)
    ap.add_argument("--scenes", type=int, default=4)
    ap.add_argument("--out", default="out/preview")
    args = ap.parse_args()

    cfg = parse_config(args.config)
    library = build_texture_library(cfg.textures, texture_master_seed(cfg.master_seed))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    for i in range(args.scenes):
        spec = sample_scene(cfg.sampler, cfg.master_seed, i)
        result = render(spec, library, background=cfg.render.background_color)
        color = downscale(result.color, cfg.render.downscale)
        mask = downscale_idmask(result.id_mask, cfg.render.downscale)
        shapes = {o.id: o.shape for o in spec.objects}
        anns = boxes_from_idmask(mask, shapes, cfg.annotator.min_visible_pixels)

        img = Image.fromarray(to_uint8(color), mode="RGB")
        draw = ImageDraw.Draw(img)
        for ann in anns:
            b = ann.bbox
            draw.rectangle([b.xmin, b.ymin, b.xmax - 1, b.ymax - 1],
                           outline=CLASS_COLORS[ann.shape], width=2)
            draw.text((b.xmin + 2, b.ymin + 2), ann.shape.label, fill=CLASS_COLORS[ann.shape])
        path = out_dir / f"preview_{i:03d}.png"
        img.save(path)
        print(f"{path}  objects={len(spec.objects)} annotated={len(anns)}")


if __name__ == "__main__":
    main()

"""Model worker for the pretrained backend.

Loads TorchScript exports of an inversion encoder, a style-based generator and
(optionally) a face parser, then serves requests over stdin/stdout.

Framing: each message is one JSON line followed by a raw little-endian payload
whose size is implied by the header. Images travel as float32 HWC RGB in
[0, 1]; latents as float32 [layers, width]; label maps as uint8 HW.
"""

import argparse
import json
import sys

import numpy as np


def reply(header, payload=b""):
    out = sys.stdout.buffer
    out.write((json.dumps(header) + "\n").encode())
    out.write(payload)
    out.flush()


def read_exact(n):
    buf = sys.stdin.buffer.read(n)
    if len(buf) != n:
        raise EOFError("short read")
    return buf


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--encoder", required=True)
    ap.add_argument("--generator", required=True)
    ap.add_argument("--parser")
    ap.add_argument("--encoder-size", type=int, default=256)
    ap.add_argument("--parser-size", type=int, default=512)
    args = ap.parse_args()

    try:
        import torch
        import torch.nn.functional as F
    except ImportError as e:
        reply({"ok": False, "error": f"torch import failed: {e}",
               "hint": "install PyTorch for the configured python interpreter"})
        return 1

    torch.manual_seed(0)
    torch.use_deterministic_algorithms(True)
    torch.set_grad_enabled(False)

    try:
        encoder = torch.jit.load(args.encoder, map_location="cpu").eval()
        generator = torch.jit.load(args.generator, map_location="cpu").eval()
        parser = torch.jit.load(args.parser, map_location="cpu").eval() if args.parser else None
    except Exception as e:  # noqa: BLE001
        reply({"ok": False, "error": f"cannot load model: {e}",
               "hint": "models must be TorchScript exports (torch.jit.save)"})
        return 1

    def to_tensor(raw, w, h):
        arr = np.frombuffer(raw, dtype="<f4").reshape(h, w, 3)
        return torch.from_numpy(arr.copy()).permute(2, 0, 1).unsqueeze(0)

    def first(out):
        return out[0] if isinstance(out, (tuple, list)) else out

    def encode(img):
        x = F.interpolate(img, size=(args.encoder_size, args.encoder_size),
                          mode="bilinear", align_corners=False)
        return first(encoder(x * 2.0 - 1.0))[0]

    def generate(latent):
        y = first(generator(latent.unsqueeze(0)))
        return ((y[0] + 1.0) / 2.0).clamp(0.0, 1.0)

    probe = encode(torch.zeros(1, 3, args.encoder_size, args.encoder_size))
    layers, width = probe.shape
    size = generate(probe).shape
    reply({"ok": True, "latent": [int(layers), int(width)],
           "size": [int(size[2]), int(size[1])], "parser": parser is not None})

    mean = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
    std = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)

    for line in sys.stdin.buffer:
        if not line.strip():
            continue
        req = json.loads(line)
        op = req.get("op")
        try:
            if op == "encode":
                w, h = req["width"], req["height"]
                img = to_tensor(read_exact(w * h * 12), w, h)
                z = encode(img).contiguous().numpy().astype("<f4")
                reply({"ok": True, "len": int(z.size)}, z.tobytes())
            elif op == "generate":
                n, d = req["layers"], req["dims"]
                z = np.frombuffer(read_exact(n * d * 4), dtype="<f4").reshape(n, d)
                img = generate(torch.from_numpy(z.copy()))
                hwc = img.permute(1, 2, 0).contiguous().numpy().astype("<f4")
                reply({"ok": True, "width": int(hwc.shape[1]), "height": int(hwc.shape[0])},
                      hwc.tobytes())
            elif op == "parse":
                w, h = req["width"], req["height"]
                img = to_tensor(read_exact(w * h * 12), w, h)
                if parser is None:
                    reply({"ok": False, "error": "no parser loaded"})
                    continue
                x = F.interpolate(img, size=(args.parser_size, args.parser_size),
                                  mode="bilinear", align_corners=False)
                logits = first(parser((x - mean) / std))
                labels = logits.argmax(dim=1, keepdim=True).float()
                labels = F.interpolate(labels, size=(h, w), mode="nearest")
                out = labels[0, 0].to(torch.uint8).contiguous().numpy()
                reply({"ok": True, "width": w, "height": h}, out.tobytes())
            elif op == "quit":
                return 0
            else:
                reply({"ok": False, "error": f"unknown op {op!r}"})
        except EOFError:
            return 1
        except Exception as e:  # noqa: BLE001
            reply({"ok": False, "error": f"{type(e).__name__}: {e}"})
    return 0


if __name__ == "__main__":
    sys.exit(main())

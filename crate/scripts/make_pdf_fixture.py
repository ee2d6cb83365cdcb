"""Builds the bundled PDF fixture from a prose sample.

Usage: python3 scripts/make_pdf_fixture.py PROSE.txt OUT.pdf

Streams are Flate-compressed as binary (no ASCII85), with an embedded
TrueType font and a raster image, which is how most PDFs in the wild look.
"""
import random
import sys
import zlib

from reportlab import rl_config
from reportlab.graphics.shapes import Drawing, Rect
from reportlab.lib import colors
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.pdfbase import pdfmetrics
from reportlab.pdfbase.ttfonts import TTFont
from reportlab.platypus import Image, Paragraph, SimpleDocTemplate, Table

rl_config.useA85 = 0
rl_config.invariant = 1

FONT = "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf"


def gradient_png(w, h, rng):
    from PIL import Image as PILImage

    img = PILImage.new("RGB", (w, h))
    px = img.load()
    for y in range(h):
        for x in range(w):
            n = rng.randint(0, 40)
            px[x, y] = ((x * 255 // w + n) % 256, (y * 255 // h + n) % 256, (x + y + n) % 256)
    import io

    buf = io.BytesIO()
    img.save(buf, format="PNG")
    buf.seek(0)
    return buf


def main(prose_path, out_path):
    rng = random.Random(7)
    words = open(prose_path, encoding="utf-8").read().split()
    pdfmetrics.registerFont(TTFont("DejaVu", FONT))
    styles = getSampleStyleSheet()
    body = styles["BodyText"]
    body.fontName = "DejaVu"

    def para(n):
        i = rng.randrange(len(words) - n)
        return " ".join(words[i : i + n])

    story = []
    for sec in range(80):
        story.append(Paragraph(f"Section {sec + 1}: " + para(5), styles["Heading2"]))
        for _ in range(4):
            story.append(Paragraph(para(rng.randint(60, 140)), body))
        if sec % 3 == 0:
            rows = [[f"{rng.random() * 100:.2f}" for _ in range(5)] for _ in range(6)]
            story.append(Table(rows))
        if sec % 4 == 1:
            d = Drawing(300, 100)
            for k in range(20):
                d.add(Rect(k * 15, 0, 10, rng.random() * 90, fillColor=colors.Color(rng.random(), 0.4, 0.6)))
            story.append(d)
        if sec % 25 == 7:
            story.append(Image(gradient_png(96, 64, rng), width=192, height=128))
    doc = SimpleDocTemplate(out_path, pagesize=letter, pageCompression=1, title="Fixture report")
    doc.build(story)


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])

from .cli import main


class InpaintRunner:
    def __init__(self):
        self.version = "0.1.0"

    def run(self, argv=None) -> int:
        return main(argv)

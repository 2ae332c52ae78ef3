from utils.image.filters import blur_per_channel, smooth_3x3

__all__ = ["blur_per_channel", "smooth_3x3"]

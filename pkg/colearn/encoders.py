'''Frame-level encoders for the audio (fbank-like) and visual (lip feature) streams.

Audio runs at 100 frames per second and visual at 25, so for the same clip
the audio sequence is four times longer. Neither encoder changes the frame
count of its input.
'''

from .layers import Affine, Conv1d, LayerNorm, Module, TCNBlock
from .tensor import as_tensor, relu

AUDIO_FEATURES = 80
VISUAL_FEATURES = 32


class ConvBlock(Module):
    '''Conv1d, then ReLU, then layer normalization.'''

    def __init__(self, in_channels, out_channels, kernel, rng, dilation=1):
        self.conv = Conv1d(in_channels, out_channels, kernel, rng, dilation)
        self.norm = LayerNorm(out_channels)

    def forward(self, x):
        return self.norm(relu(self.conv(x)))


class AudioEncoder(Module):
    '''Three convolutional blocks and a 1x1 convolution + ReLU projection.

    Parameters
    ----------
    channels : int
        Output width C_a.
    rng : numpy.random.Generator
        Source of the initial weights.
    in_channels : int
        Input feature dimension, 80 fbank-like coefficients.
    kernels, dilations : tuple of int
        Kernel size and dilation of the three blocks.
    '''

    def __init__(self, channels, rng, in_channels=AUDIO_FEATURES, kernels=(5, 3, 3), dilations=(1, 2, 3)):
        self.in_channels = in_channels
        self.channels = channels
        widths = [in_channels] + [channels] * len(kernels)
        self.blocks = [ConvBlock(widths[i], widths[i + 1], k, rng, d)
                       for i, (k, d) in enumerate(zip(kernels, dilations))]
        self.projection = Conv1d(channels, channels, 1, rng)

    def forward(self, x):
        '''Map an (80, T_a) frame matrix to the (C_a, T_a) feature map F_a.'''
        x = as_tensor(x)
        if x.data.ndim != 2 or x.shape[0] != self.in_channels:
            raise ValueError('AudioEncoder expects ({}, T) input, got {}'.format(self.in_channels, x.shape))
        if x.shape[1] < 1:
            raise ValueError('AudioEncoder needs at least one frame')
        for block in self.blocks:
            x = block(x)
        return relu(self.projection(x))


class VisualEncoder(Module):
    '''Per-frame affine input map followed by dilated TCN blocks.'''

    def __init__(self, channels, rng, in_channels=VISUAL_FEATURES, kernel=5, dilations=(1, 2)):
        self.in_channels = in_channels
        self.channels = channels
        self.input = Affine(in_channels, channels, rng)
        self.tcn = [TCNBlock(channels, rng, kernel, d) for d in dilations]

    @property
    def reach(self):
        '''Frames on each side that can influence one output frame.'''
        return sum(block.reach for block in self.tcn)

    def forward(self, x):
        '''Map a (D_v, T_v) frame matrix to the (C_v, T_v) feature map F_v.'''
        x = as_tensor(x)
        if x.data.ndim != 2 or x.shape[0] != self.in_channels:
            raise ValueError('VisualEncoder expects ({}, T) input, got {}'.format(self.in_channels, x.shape))
        if x.shape[1] < 1:
            raise ValueError('VisualEncoder needs at least one frame')
        x = self.input(x)
        for block in self.tcn:
            x = block(x)
        return x

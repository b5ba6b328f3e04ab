# ADE-Net - attack discriminator with expert ensembles

#pragma once

// Overridden by the build with the git-described version when available.
#ifndef SPECSSM_VERSION
#define SPECSSM_VERSION "0.1.0"
#endif

7 20
-0.4633745208041392 0.4381163017766627 0.03295645273030624 -0.3113674713748863 -0.022804163997442117 0.4291797672546297 -0.3506117556219349 0.18373595884258578 -0.9977566287953493 0.4159922284458533 -0.08518855289216805 0.528558480288755 -0.015864642243933767 -0.18728254475167289 0.20563641889836642 0.09633878908207695 0.13819483409595798 0.5819399741633773 0.3749491744091075 -0.5506387471485532
-0.0685738464021458 0.15619680792309265 0.6903137662864025 0.002492043381054019 0.20752040952583203 -0.4516892134041262 0.17682141405487156 0.6819137606518123 -0.0026800059559420187 0.4114975622699563 0.11222791944625278 -0.7500255174561039 0.025859679550349835 -0.38441818604439804 -0.1449394964345866 0.5753841908625745 -0.14459670179132314 -0.5494484164928266 0.031385968053567685 0.7170547273589526
0.027186666977830714 -0.18446219617534662 0.2322527348008307 0.24005392840560885 -0.3760027328778566 0.06308202845686073 -0.8936016040404884 -0.6018420157892908 0.22854661749338612 -0.03823254877810001 0.28646682336381657 -0.27621030633794114 -0.21962134639148295 0.7570178540839827 -0.13089739674015655 0.23011565390402353 1.210580114306989 0.3600217116114636 -0.3351274718600213 -0.09646304271751653
0.728672262082862 0.16111646079427508 -0.9025915813478721 -0.6029038546690125 0.07481772201945831 0.4896123523767529 -1.1781760059885364 0.25657884458785624 -0.21135782974867115 0.1774366177916947 0.46926983933731536 -0.2771314286847507 -0.15774162637816225 0.38643195258235113 0.01702407421682603 0.17674260520177076 0.14160840660794916 0.10019911249817175 0.26215449002764774 0.17419235321949164
0.39405825964923585 0.28620898998679156 -0.24061639209524588 0.8811003116600609 -0.6947265107845098 0.6604091975749943 -0.6857244204892949 0.42856772184619846 0.2190937302523023 0.32620211708737984 0.1694963554655649 -1.0550958786982345 -0.16749275299476965 -0.4198889256812566 -0.020493098659261664 0.01087041207439465 1.497986970897117 0.36023584410737974 0.5485332809735001 -0.13490118077805588
0.04758835021866951 -0.5159953489326325 0.34890389164358937 -0.2704942869893003 -0.022273397901816223 0.686588435843061 1.232466598015237 -0.026561688676469807 1.292157224610082 0.11543560098807942 -0.6821262121618654 -0.8626292576399752 0.4808179706980288 0.742259308085257 -0.35197678062563453 0.31927969610034024 0.7041132971677108 -0.5838341212629063 -0.12913095582832695 0.44123703927371805
0.060906637823504535 0.3344293090298439 -0.41113053939086475 0.4514915133544491 0.30634147043881965 0.4926787138772556 -0.19558478349892638 -0.5097486019044718 -0.6014448336453134 -0.07541013820891168 -0.6930911414023045 -0.27851000091912964 -0.32457286899573495 -0.46280022541589266 0.29594162306945593 -0.8931815481387374 -0.2176348420250028 -0.49584821476890356 -0.6388028732758549 -0.27129076218626225
